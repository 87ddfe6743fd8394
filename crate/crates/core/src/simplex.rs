//! Nelder–Mead downhill simplex with the dimension-adaptive coefficients of
//! Gao & Han, which behave much better than the textbook ones past ~5 dimensions.

use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub max_evals: usize,
    /// Stop when the simplex's function spread falls below `ftol·(|f_best| + ftol)`.
    pub ftol: f64,
    /// ... and every vertex lies within `xtol` (∞-norm) of the best one.
    pub xtol: f64,
    pub adaptive: bool,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            max_evals: 20_000,
            ftol: 1e-14,
            xtol: 1e-10,
            adaptive: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub value: T,
    pub evals: usize,
    pub converged: bool,
}

impl NelderMead {
    /// Minimizes `f` from `x0`, building an axis-aligned initial simplex with edge `step`.
    /// Non-finite objective values are treated as +∞.
    pub fn minimize<T, F>(&self, mut f: F, x0: &[T], step: T) -> Minimum<T>
    where
        T: Real,
        F: FnMut(&[T]) -> T,
    {
        let n = x0.len();
        let mut evals = 0usize;
        let mut eval = |x: &[T], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                T::infinity()
            } else {
                v
            }
        };
        if n == 0 {
            let value = eval(x0, &mut evals);
            return Minimum {
                x: Vec::new(),
                value,
                evals,
                converged: true,
            };
        }

        let nf = lit::<T>(n as f64);
        let (alpha, beta, gamma, delta) = if self.adaptive && n > 2 {
            (
                T::one(),
                T::one() + lit::<T>(2.0) / nf,
                lit::<T>(0.75) - T::one() / (lit::<T>(2.0) * nf),
                T::one() - T::one() / nf,
            )
        } else {
            (T::one(), lit(2.0), lit(0.5), lit(0.5))
        };

        let mut pts: Vec<Vec<T>> = Vec::with_capacity(n + 1);
        pts.push(x0.to_vec());
        for i in 0..n {
            let mut p = x0.to_vec();
            p[i] = p[i] + step;
            pts.push(p);
        }
        let mut vals: Vec<T> = pts.iter().map(|p| eval(p, &mut evals)).collect();

        let ftol = lit::<T>(self.ftol);
        let xtol = lit::<T>(self.xtol);
        let mut converged = false;
        let mut centroid = vec![T::zero(); n];
        let mut trial = vec![T::zero(); n];
        let mut trial2 = vec![T::zero(); n];

        while evals < self.max_evals {
            // order: best first
            let mut idx: Vec<usize> = (0..=n).collect();
            idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(std::cmp::Ordering::Equal));
            pts = idx.iter().map(|&i| pts[i].clone()).collect();
            vals = idx.iter().map(|&i| vals[i]).collect();

            let fspread = vals[n] - vals[0];
            let xspread = pts[1..]
                .iter()
                .flat_map(|p| p.iter().zip(&pts[0]).map(|(&a, &b)| (a - b).abs()))
                .fold(T::zero(), T::max);
            if vals[0].is_finite() && fspread <= ftol * (vals[0].abs() + ftol) && xspread <= xtol {
                converged = true;
                break;
            }

            for c in centroid.iter_mut() {
                *c = T::zero();
            }
            for p in &pts[..n] {
                for (c, &v) in centroid.iter_mut().zip(p) {
                    *c = *c + v;
                }
            }
            for c in centroid.iter_mut() {
                *c = *c / nf;
            }

            for i in 0..n {
                trial[i] = centroid[i] + alpha * (centroid[i] - pts[n][i]);
            }
            let fr = eval(&trial, &mut evals);
            if fr < vals[0] {
                for i in 0..n {
                    trial2[i] = centroid[i] + beta * (trial[i] - centroid[i]);
                }
                let fe = eval(&trial2, &mut evals);
                if fe < fr {
                    pts[n].copy_from_slice(&trial2);
                    vals[n] = fe;
                } else {
                    pts[n].copy_from_slice(&trial);
                    vals[n] = fr;
                }
                continue;
            }
            if fr < vals[n - 1] {
                pts[n].copy_from_slice(&trial);
                vals[n] = fr;
                continue;
            }
            // contraction, outside if the reflection improved on the worst point
            let outside = fr < vals[n];
            for i in 0..n {
                trial2[i] = if outside {
                    centroid[i] + gamma * (trial[i] - centroid[i])
                } else {
                    centroid[i] - gamma * (centroid[i] - pts[n][i])
                };
            }
            let fc = eval(&trial2, &mut evals);
            if (outside && fc <= fr) || (!outside && fc < vals[n]) {
                pts[n].copy_from_slice(&trial2);
                vals[n] = fc;
                continue;
            }
            // shrink toward the best vertex
            let best = pts[0].clone();
            for j in 1..=n {
                for i in 0..n {
                    pts[j][i] = best[i] + delta * (pts[j][i] - best[i]);
                }
                vals[j] = eval(&pts[j], &mut evals);
            }
        }

        let best = (0..=n)
            .min_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(std::cmp::Ordering::Equal))
            .expect("simplex has vertices");
        Minimum {
            x: pts[best].clone(),
            value: vals[best],
            evals,
            converged,
        }
    }
}
