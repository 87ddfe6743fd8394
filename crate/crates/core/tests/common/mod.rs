#![allow(dead_code)]

use optcal::fisher::{MeasurementPlan, PlanEntry, VarianceModel};
use optcal::signal::{expectation, Param, Quadrature};
use optcal::{Model, Plan};

pub fn plan(points: &[(f64, Quadrature, u64)]) -> Plan {
    MeasurementPlan::new(
        points
            .iter()
            .map(|&(time, quadrature, shots)| PlanEntry {
                time,
                quadrature,
                shots,
            })
            .collect(),
    )
    .unwrap()
}

/// Expected negative log-likelihood gap `E_θ[ℓ(θ) − ℓ(θ')]` summed over shots.
pub fn divergence(truth: &Model, other: &Model, plan: &Plan, vm: VarianceModel) -> f64 {
    plan.entries
        .iter()
        .map(|e| {
            let m = expectation(truth, e.quadrature, e.time).unwrap();
            let m2 = expectation(other, e.quadrature, e.time).unwrap();
            let per_shot = match vm {
                VarianceModel::UnitShot => 0.5 * (m - m2).powi(2),
                VarianceModel::Binomial => {
                    let (p, q) = ((1.0 + m) / 2.0, (1.0 + m2) / 2.0);
                    p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln()
                }
            };
            e.shots as f64 * per_shot
        })
        .sum()
}

pub fn shifted(m: &Model, moves: &[(Param, f64)]) -> Model {
    let mut out = *m;
    for &(p, d) in moves {
        out.set(p, m.get(p).unwrap() + d).unwrap();
    }
    out
}

/// Hessian of the divergence at the truth by central differences.
pub fn oracle_fisher(m: &Model, free: &[Param], plan: &Plan, vm: VarianceModel) -> Vec<Vec<f64>> {
    let h = 1e-3;
    let f = |moves: &[(Param, f64)]| divergence(m, &shifted(m, moves), plan, vm);
    let k = free.len();
    let mut out = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            let (a, b) = (free[i], free[j]);
            out[i][j] = if i == j {
                (f(&[(a, h)]) - 2.0 * f(&[]) + f(&[(a, -h)])) / (h * h)
            } else {
                (f(&[(a, h), (b, h)]) - f(&[(a, h), (b, -h)]) - f(&[(a, -h), (b, h)]) + f(&[(a, -h), (b, -h)]))
                    / (4.0 * h * h)
            };
        }
    }
    out
}

pub fn five_point(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// Two-sample Kolmogorov–Smirnov p-value (asymptotic).
pub fn ks_p_value(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let p: f64 = (1..=100)
        .map(|k| {
            let k = k as f64;
            2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum();
    p.clamp(0.0, 1.0)
}

pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn correlation(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let (ma, mb) = pairs.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let cov = pairs.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum::<f64>() / n;
    let va = pairs.iter().map(|p| (p.0 - ma).powi(2)).sum::<f64>() / n;
    let vb = pairs.iter().map(|p| (p.1 - mb).powi(2)).sum::<f64>() / n;
    cov / (va * vb).sqrt()
}
