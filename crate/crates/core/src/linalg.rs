//! Dense linear algebra for the tiny (p ≤ 5) symmetric systems used here.

use crate::scalar::{lit, Real};

pub type Matrix<T> = Vec<Vec<T>>;

pub fn zeros<T: Real>(n: usize) -> Matrix<T> {
    vec![vec![T::zero(); n]; n]
}

pub fn identity<T: Real>(n: usize) -> Matrix<T> {
    let mut m = zeros(n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    m
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order with their unit eigenvectors (columns
/// returned as separate vectors).
pub fn symmetric_eigen<T: Real>(a: &Matrix<T>) -> (Vec<T>, Vec<Vec<T>>) {
    let n = a.len();
    let mut m = a.clone();
    let mut v = identity::<T>(n);
    let two = lit::<T>(2.0);
    for _sweep in 0..64 {
        let mut off = T::zero();
        let mut scale = T::zero();
        for i in 0..n {
            scale = scale + m[i][i] * m[i][i];
            for j in (i + 1)..n {
                off = off + m[i][j] * m[i][j];
            }
        }
        if off <= T::epsilon() * T::epsilon() * scale || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q] == T::zero() {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (two * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i][i].partial_cmp(&m[j][j]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = order.iter().map(|&j| (0..n).map(|i| v[i][j]).collect()).collect();
    (values, vectors)
}

/// Inverse of a non-singular matrix. Closed forms up to 3×3, Gauss–Jordan with
/// partial pivoting beyond. Returns `None` on an exactly singular pivot.
pub fn invert<T: Real>(a: &Matrix<T>) -> Option<Matrix<T>> {
    match a.len() {
        0 => None,
        1 => {
            let d = a[0][0];
            (d != T::zero()).then(|| vec![vec![T::one() / d]])
        }
        2 => {
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            if det == T::zero() {
                return None;
            }
            let r = T::one() / det;
            Some(vec![vec![a[1][1] * r, -a[0][1] * r], vec![-a[1][0] * r, a[0][0] * r]])
        }
        3 => {
            let c00 = a[1][1] * a[2][2] - a[1][2] * a[2][1];
            let c01 = a[1][2] * a[2][0] - a[1][0] * a[2][2];
            let c02 = a[1][0] * a[2][1] - a[1][1] * a[2][0];
            let det = a[0][0] * c00 + a[0][1] * c01 + a[0][2] * c02;
            if det == T::zero() {
                return None;
            }
            let r = T::one() / det;
            Some(vec![
                vec![
                    c00 * r,
                    (a[0][2] * a[2][1] - a[0][1] * a[2][2]) * r,
                    (a[0][1] * a[1][2] - a[0][2] * a[1][1]) * r,
                ],
                vec![
                    c01 * r,
                    (a[0][0] * a[2][2] - a[0][2] * a[2][0]) * r,
                    (a[0][2] * a[1][0] - a[0][0] * a[1][2]) * r,
                ],
                vec![
                    c02 * r,
                    (a[0][1] * a[2][0] - a[0][0] * a[2][1]) * r,
                    (a[0][0] * a[1][1] - a[0][1] * a[1][0]) * r,
                ],
            ])
        }
        n => {
            let mut m = a.clone();
            let mut inv = identity::<T>(n);
            for col in 0..n {
                let pivot = (col..n).max_by(|&i, &j| {
                    m[i][col]
                        .abs()
                        .partial_cmp(&m[j][col].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })?;
                if m[pivot][col] == T::zero() {
                    return None;
                }
                m.swap(col, pivot);
                inv.swap(col, pivot);
                let d = T::one() / m[col][col];
                for k in 0..n {
                    m[col][k] = m[col][k] * d;
                    inv[col][k] = inv[col][k] * d;
                }
                for r in 0..n {
                    if r != col {
                        let f = m[r][col];
                        if f != T::zero() {
                            for k in 0..n {
                                m[r][k] = m[r][k] - f * m[col][k];
                                inv[r][k] = inv[r][k] - f * inv[col][k];
                            }
                        }
                    }
                }
            }
            Some(inv)
        }
    }
}

/// Solves `a·x = b` for a small dense system.
pub fn solve<T: Real>(a: &Matrix<T>, b: &[T]) -> Option<Vec<T>> {
    let inv = invert(a)?;
    Some(
        inv.iter()
            .map(|row| row.iter().zip(b).map(|(&r, &x)| r * x).sum())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matmul(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
        let n = a.len();
        let mut c = zeros(n);
        for i in 0..n {
            for j in 0..n {
                c[i][j] = (0..n).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        c
    }

    #[test]
    fn inverse_matches_identity_for_all_sizes() {
        for n in 1..=5 {
            let mut a = zeros::<f64>(n);
            for i in 0..n {
                for j in 0..n {
                    a[i][j] = 1.0 / (1.0 + (i + j) as f64) + if i == j { n as f64 } else { 0.0 };
                }
            }
            let inv = invert(&a).unwrap();
            let prod = matmul(&a, &inv);
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((prod[i][j] - want).abs() < 1e-12, "n={n} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn eigen_of_known_matrix() {
        let a = vec![vec![2.0f64, 1.0], vec![1.0, 2.0]];
        let (vals, vecs) = symmetric_eigen(&a);
        assert!((vals[0] - 1.0).abs() < 1e-14);
        assert!((vals[1] - 3.0).abs() < 1e-14);
        let v = &vecs[0];
        assert!((v[0] + v[1]).abs() < 1e-12);
    }

    #[test]
    fn singular_inverse_is_none() {
        assert!(invert(&zeros::<f64>(2)).is_none());
        assert!(invert(&vec![vec![1.0, 2.0], vec![2.0, 4.0]]).is_none());
    }
}
