//! Parameter recovery from sampled means: damped Gauss–Newton least squares
//! for any model, and the closed-form X/Y single-time inversion.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::sampler::SampleSet;
use crate::scalar::{lit, Real};
use crate::signal::{expectation_unchecked, partial, ModelFamily, Param, Quadrature, RamseyModel};
use crate::simplex::NelderMead;

const MAX_ITERATIONS: usize = 200;
/// Condition number of `JᵀJ` beyond which the simplex fallback takes over.
const RANK_LOSS_CONDITION: f64 = 1e14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult<T> {
    pub params: BTreeMap<Param, T>,
    pub converged: bool,
    /// Final mean-square residual.
    pub objective: T,
    pub iterations: usize,
    pub frozen: Vec<Param>,
}

impl<T: Real> EstimateResult<T> {
    pub fn get(&self, p: Param) -> Option<T> {
        self.params.get(&p).copied()
    }
}

struct Fit<'a, T> {
    base: RamseyModel<T>,
    free: Vec<Param>,
    data: &'a SampleSet<T>,
}

impl<T: Real> Fit<'_, T> {
    fn model(&self, theta: &[T]) -> RamseyModel<T> {
        let mut m = self.base;
        for (&p, &v) in self.free.iter().zip(theta) {
            m.set(p, v).expect("free parameters belong to the model");
        }
        m
    }

    fn clamp(&self, theta: &mut [T]) {
        for (&p, v) in self.free.iter().zip(theta.iter_mut()) {
            if p == Param::Gamma && *v < T::zero() {
                *v = T::zero();
            }
        }
    }

    fn cost(&self, theta: &[T]) -> T {
        let m = self.model(theta);
        self.data
            .entries
            .iter()
            .map(|e| {
                let r = e.mean - expectation_unchecked(&m, e.quadrature, e.time);
                r * r
            })
            .sum()
    }

    /// Normal equations `JᵀJ` and `Jᵀr` at `theta`.
    fn normal(&self, theta: &[T]) -> (linalg::Matrix<T>, Vec<T>) {
        let m = self.model(theta);
        let p = self.free.len();
        let mut jtj = linalg::zeros::<T>(p);
        let mut jtr = vec![T::zero(); p];
        let mut g = vec![T::zero(); p];
        for e in &self.data.entries {
            let r = e.mean - expectation_unchecked(&m, e.quadrature, e.time);
            for (gk, &param) in g.iter_mut().zip(&self.free) {
                *gk = partial(&m, e.quadrature, e.time, param);
            }
            for j in 0..p {
                jtr[j] = jtr[j] + g[j] * r;
                for k in 0..p {
                    jtj[j][k] = jtj[j][k] + g[j] * g[k];
                }
            }
        }
        (jtj, jtr)
    }

    fn rank_deficient(jtj: &linalg::Matrix<T>) -> bool {
        let (vals, _) = linalg::symmetric_eigen(jtj);
        let lo = vals[0];
        let hi = *vals.last().expect("non-empty");
        !(hi > T::zero()) || !(lo > T::zero()) || hi / lo > lit(RANK_LOSS_CONDITION)
    }

    /// Levenberg–Marquardt from `theta`; falls back to a simplex search when
    /// the Jacobian loses rank. Returns `(theta, cost, iterations, converged)`.
    fn solve(&self, mut theta: Vec<T>) -> (Vec<T>, T, usize, bool) {
        self.clamp(&mut theta);
        let mut cost = self.cost(&theta);
        let mut lambda = lit::<T>(1e-3);
        let tiny = lit::<T>(1e-30);
        let rel = lit::<T>(1e-14);
        for it in 1..=MAX_ITERATIONS {
            let (jtj, jtr) = self.normal(&theta);
            if Self::rank_deficient(&jtj) {
                return self.simplex(theta, it);
            }
            let grad_norm = jtr.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
            if cost <= tiny || grad_norm <= tiny {
                return (theta, cost, it, true);
            }
            let mut improved = false;
            while lambda < lit(1e16) {
                let mut a = jtj.clone();
                for (i, row) in a.iter_mut().enumerate() {
                    row[i] = row[i] + lambda * jtj[i][i].max(lit(1e-300));
                }
                let Some(step) = linalg::solve(&a, &jtr) else {
                    lambda = lambda * lit(10.0);
                    continue;
                };
                let mut trial: Vec<T> = theta.iter().zip(&step).map(|(&x, &d)| x + d).collect();
                self.clamp(&mut trial);
                let c = self.cost(&trial);
                if c.is_finite() && c < cost {
                    let moved = theta
                        .iter()
                        .zip(&trial)
                        .fold(T::zero(), |a, (&x, &y)| a.max((x - y).abs() / (x.abs() + lit(1e-12))));
                    let drop = (cost - c) / cost.max(tiny);
                    theta = trial;
                    cost = c;
                    lambda = (lambda / lit(3.0)).max(lit(1e-12));
                    improved = true;
                    if moved <= lit(1e-13) || drop <= rel {
                        return (theta, cost, it, true);
                    }
                    break;
                }
                lambda = lambda * lit(4.0);
            }
            if !improved {
                // no descent direction left within the feasible set
                return (theta, cost, it, true);
            }
        }
        (theta, cost, MAX_ITERATIONS, false)
    }

    fn simplex(&self, theta: Vec<T>, used: usize) -> (Vec<T>, T, usize, bool) {
        let nm = NelderMead {
            max_evals: 4000,
            ftol: 1e-15,
            xtol: 1e-12,
            adaptive: true,
        };
        let step = theta.iter().fold(lit::<T>(0.05), |a, &v| a.max(v.abs() * lit(0.05)));
        let r = nm.minimize(
            |x: &[T]| {
                let mut x = x.to_vec();
                self.clamp(&mut x);
                self.cost(&x)
            },
            &theta,
            step,
        );
        let mut x = r.x;
        self.clamp(&mut x);
        let cost = self.cost(&x);
        (x, cost, used + r.evals, r.converged)
    }
}

/// Least-squares fit of `init`'s model family to `data`, holding `frozen` at
/// their values in `init`.
///
/// With X-only data the sign of ω is unobservable; both signs are tried and
/// the result is reported with `ω ≥ 0` (φ flipped alongside in the
/// five-parameter model).
pub fn fit_least_squares<T: Real>(
    init: &RamseyModel<T>,
    data: &SampleSet<T>,
    frozen: &[Param],
) -> Result<EstimateResult<T>> {
    init.validate()?;
    for &p in frozen {
        init.get(p)?;
    }
    let free: Vec<Param> = init.params().iter().copied().filter(|p| !frozen.contains(p)).collect();
    if free.is_empty() {
        return Err(Error::domain("every parameter is frozen"));
    }
    if free.len() > data.entries.len() {
        return Err(Error::UnderDetermined {
            free: free.len(),
            data: data.entries.len(),
        });
    }
    for e in &data.entries {
        if !(e.time >= T::zero()) || !e.time.is_finite() || !e.mean.is_finite() {
            return Err(Error::domain(
                "sample entries must have finite non-negative times and finite means",
            ));
        }
    }
    let fit = Fit {
        base: *init,
        free: free.clone(),
        data,
    };
    let theta0: Vec<T> = free.iter().map(|&p| init.get(p).expect("checked")).collect();
    let mut best = fit.solve(theta0.clone());
    let x_only = !data.has_quadrature(Quadrature::Y);
    let omega_idx = free.iter().position(|&p| p == Param::Omega);
    if let (true, Some(k)) = (x_only, omega_idx) {
        let mut flipped = theta0;
        flipped[k] = -flipped[k];
        if let Some(j) = free.iter().position(|&p| p == Param::Phase) {
            flipped[j] = -flipped[j];
        }
        let alt = fit.solve(flipped);
        if alt.1 < best.1 {
            best = alt;
        }
    }
    let (mut theta, cost, iterations, converged) = best;
    if let (true, Some(k)) = (x_only, omega_idx) {
        if theta[k] < T::zero() && init.family() != ModelFamily::PureDecay {
            theta[k] = -theta[k];
            if let Some(j) = free.iter().position(|&p| p == Param::Phase) {
                theta[j] = -theta[j];
            }
        }
    }
    let fitted = fit.model(&theta);
    let params = init
        .params()
        .iter()
        .map(|&p| (p, fitted.get(p).expect("model parameter")))
        .collect();
    let n = lit::<T>(data.entries.len() as f64);
    Ok(EstimateResult {
        params,
        converged,
        objective: cost / n,
        iterations,
        frozen: frozen.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XyInversion<T> {
    pub omega: T,
    pub gamma: T,
    /// Set when `x² + y² > 1` forced `γ = 0`.
    pub clamped: bool,
}

/// Closed-form `(ω, γ)` from X and Y means measured at the same time `t`.
///
/// The phase is taken on the principal branch unless `prior` is given with
/// `|prior·t| ≥ π`, in which case the branch nearest `prior` is chosen.
pub fn invert_xy<T: Real>(x: T, y: T, t: T, prior: Option<T>) -> Result<XyInversion<T>> {
    if !(t > T::zero()) || !t.is_finite() {
        return Err(Error::domain("inversion needs t > 0"));
    }
    if !x.is_finite() || !y.is_finite() {
        return Err(Error::domain("quadrature means must be finite"));
    }
    let r = x.hypot(y);
    if r == T::zero() {
        return Err(Error::Indeterminate("X = Y = 0 leaves the phase undefined".into()));
    }
    let phase = y.atan2(x);
    let mut omega = phase / t;
    if let Some(w) = prior {
        if (w * t).abs() >= T::PI() {
            let two_pi = T::PI() + T::PI();
            let k = ((w * t - phase) / two_pi).round();
            omega = (phase + k * two_pi) / t;
        }
    }
    let (gamma, clamped) = if r > T::one() {
        (T::zero(), true)
    } else {
        (-r.ln() / t, false)
    };
    Ok(XyInversion { omega, gamma, clamped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::{MeasurementPlan, PlanEntry};
    use crate::sampler::noiseless;

    fn equally_spaced(n: usize, q: &[Quadrature]) -> MeasurementPlan<f64> {
        let entries = (0..n)
            .flat_map(|i| {
                q.iter().map(move |&q| PlanEntry {
                    time: 0.15 + 2.85 * i as f64 / (n - 1) as f64,
                    quadrature: q,
                    shots: 100,
                })
            })
            .collect();
        MeasurementPlan::new(entries).unwrap()
    }

    #[test]
    fn noiseless_recovery() {
        let truth = RamseyModel::two_param(1.0, 1.0);
        let data = noiseless(&truth, &equally_spaced(20, &[Quadrature::X])).unwrap();
        let r = fit_least_squares(&RamseyModel::two_param(1.2, 0.8), &data, &[]).unwrap();
        assert!(r.converged);
        assert!((r.get(Param::Omega).unwrap() - 1.0).abs() < 1e-6);
        assert!((r.get(Param::Gamma).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn x_only_reports_positive_omega() {
        let truth = RamseyModel::two_param(1.0, 1.0);
        let data = noiseless(&truth, &equally_spaced(20, &[Quadrature::X])).unwrap();
        let r = fit_least_squares(&RamseyModel::two_param(-1.0, 1.0), &data, &[]).unwrap();
        assert!((r.get(Param::Omega).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn xy_data_keeps_the_sign() {
        let truth = RamseyModel::two_param(-0.7, 0.4);
        let data = noiseless(&truth, &equally_spaced(8, &[Quadrature::X, Quadrature::Y])).unwrap();
        let r = fit_least_squares(&RamseyModel::two_param(-0.6, 0.5), &data, &[]).unwrap();
        assert!((r.get(Param::Omega).unwrap() + 0.7).abs() < 1e-6);
    }

    #[test]
    fn frozen_parameters_stay_put() {
        let truth = RamseyModel::five_param(0.9, 0.05, 0.2, 1.3, 0.7);
        let data = noiseless(&truth, &equally_spaced(12, &[Quadrature::X])).unwrap();
        let init = RamseyModel::five_param(0.9, 0.05, 0.2, 1.1, 0.9);
        let r = fit_least_squares(&init, &data, &[Param::Amplitude, Param::Offset, Param::Phase]).unwrap();
        assert_eq!(r.get(Param::Amplitude), Some(0.9));
        assert!((r.get(Param::Omega).unwrap() - 1.3).abs() < 1e-6);
        assert!((r.get(Param::Gamma).unwrap() - 0.7).abs() < 1e-6);
    }

    #[test]
    fn under_determined_is_an_error() {
        let truth = RamseyModel::two_param(1.0, 1.0);
        let plan = MeasurementPlan::new(vec![PlanEntry {
            time: 1.0,
            quadrature: Quadrature::X,
            shots: 10,
        }])
        .unwrap();
        let data = noiseless(&truth, &plan).unwrap();
        assert!(matches!(
            fit_least_squares(&truth, &data, &[]),
            Err(Error::UnderDetermined { free: 2, data: 1 })
        ));
    }

    #[test]
    fn inversion_reference_values() {
        let e = (-1.0f64).exp();
        let r = invert_xy(e * 1f64.cos(), e * 1f64.sin(), 1.0, None).unwrap();
        assert!((r.omega - 1.0).abs() < 1e-15 && (r.gamma - 1.0).abs() < 1e-15);
        let r = invert_xy(1.0, 0.0, 1.0, None).unwrap();
        assert_eq!((r.omega, r.gamma), (0.0, 0.0));
        let r = invert_xy(0.21f64, 0.31, 1.0, None).unwrap();
        assert!((r.omega - 0.9753865).abs() < 1e-6);
        assert!((r.gamma - 0.9823427).abs() < 1e-6);
        assert!(matches!(invert_xy(0.0, 0.0, 1.0, None), Err(Error::Indeterminate(_))));
    }

    #[test]
    fn inversion_clamps_and_unwraps() {
        let r = invert_xy(0.9, 0.6, 1.0, None).unwrap();
        assert!(r.clamped && r.gamma == 0.0);
        let t = 2.0f64;
        let w = 2.5f64;
        let (x, y) = ((w * t).cos() * 0.5, (w * t).sin() * 0.5);
        let principal = invert_xy(x, y, t, None).unwrap();
        assert!((principal.omega - w).abs() > 1.0);
        let unwrapped = invert_xy(x, y, t, Some(2.4)).unwrap();
        assert!((unwrapped.omega - w).abs() < 1e-12);
    }
}
