//! Gaussian-approximation Fisher information of a measurement plan and the
//! Cramér–Rao bounds derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::{lit, to_f64, Real};
use crate::signal::{expectation_unchecked, partial, Param, Quadrature, QubitParams, RamseyModel};

/// Condition number above which a Fisher matrix is treated as non-identifiable.
pub const MAX_CONDITION: f64 = 1e12;

/// Floor applied to a vanishing binomial variance when the gradient vanishes too.
pub const VARIANCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry<T> {
    pub time: T,
    pub quadrature: Quadrature,
    pub shots: u64,
}

/// Ordered list of (time, quadrature, shots) measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPlan<T> {
    pub entries: Vec<PlanEntry<T>>,
}

impl<T: Real> MeasurementPlan<T> {
    pub fn new(entries: Vec<PlanEntry<T>>) -> Result<Self> {
        let plan = MeasurementPlan { entries };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::domain("measurement plan is empty"));
        }
        for (i, e) in self.entries.iter().enumerate() {
            if e.shots == 0 {
                return Err(Error::domain(format!("plan entry {i} has zero shots")));
            }
            if !e.time.is_finite() || e.time < T::zero() {
                return Err(Error::domain(format!("plan entry {i} has invalid time {}", e.time)));
            }
        }
        Ok(())
    }

    pub fn total_shots(&self) -> u64 {
        self.entries.iter().map(|e| e.shots).sum()
    }

    /// Concatenation of two plans.
    pub fn concat(&self, other: &Self) -> Self {
        let mut entries = self.entries.clone();
        entries.extend_from_slice(&other.entries);
        MeasurementPlan { entries }
    }
}

/// Per-shot variance used in the Gaussian likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceModel {
    /// σ² = 1 per shot.
    #[default]
    UnitShot,
    /// σ² = 1 − ⟨·⟩², the exact variance of a ±1 outcome.
    Binomial,
}

impl std::str::FromStr for VarianceModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "unit-shot" | "unit" | "UnitShot" => Ok(VarianceModel::UnitShot),
            "binomial" | "Binomial" => Ok(VarianceModel::Binomial),
            other => Err(Error::domain(format!("unknown variance model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherMatrix<T> {
    pub labels: Vec<Param>,
    pub matrix: Matrix<T>,
}

impl<T: Real> FisherMatrix<T> {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, a: Param, b: Param) -> Option<T> {
        let i = self.labels.iter().position(|&p| p == a)?;
        let j = self.labels.iter().position(|&p| p == b)?;
        Some(self.matrix[i][j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrbResult<T> {
    pub labels: Vec<Param>,
    pub per_param_variance_bound: Vec<T>,
    pub trace_bound: T,
}

impl<T: Real> CrbResult<T> {
    pub fn bound(&self, p: Param) -> Option<T> {
        let i = self.labels.iter().position(|&l| l == p)?;
        Some(self.per_param_variance_bound[i])
    }
}

/// Sorts and deduplicates a free-parameter list into canonical order, checking
/// membership in the model.
pub(crate) fn canonical_free<T: Real>(model: &RamseyModel<T>, free: &[Param]) -> Result<Vec<Param>> {
    if free.is_empty() {
        return Err(Error::domain("no free parameters"));
    }
    let mut out = free.to_vec();
    out.sort();
    out.dedup();
    if out.len() != free.len() {
        return Err(Error::domain("duplicate free parameter"));
    }
    for &p in &out {
        model.get(p)?;
    }
    Ok(out)
}

/// Accumulates `Σ w/σ² ∇μ∇μᵀ` over weighted (time, quadrature) points.
///
/// `free` must already be canonical and valid for `model`.
pub(crate) fn accumulate<T: Real, I>(
    model: &RamseyModel<T>,
    free: &[Param],
    points: I,
    vm: VarianceModel,
) -> Result<Matrix<T>>
where
    I: IntoIterator<Item = (T, Quadrature, T)>,
{
    let p = free.len();
    let mut m = linalg::zeros::<T>(p);
    let mut grad = vec![T::zero(); p];
    let floor = lit::<T>(VARIANCE_FLOOR);
    for (t, q, weight) in points {
        for (g, &param) in grad.iter_mut().zip(free) {
            *g = partial(model, q, t, param);
        }
        let var = match vm {
            VarianceModel::UnitShot => T::one(),
            VarianceModel::Binomial => {
                let mu = expectation_unchecked(model, q, t);
                let v = T::one() - mu * mu;
                if v < floor {
                    let g2 = grad.iter().fold(T::zero(), |acc, &g| acc.max(g * g));
                    if g2 > floor {
                        return Err(Error::SingularVariance { time: to_f64(t) });
                    }
                    log::warn!("binomial variance {} floored at t={}", to_f64(v), to_f64(t));
                    floor
                } else {
                    v
                }
            }
        };
        let w = weight / var;
        for j in 0..p {
            let wj = w * grad[j];
            for k in j..p {
                m[j][k] = m[j][k] + wj * grad[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            m[j][k] = m[k][j];
        }
    }
    Ok(m)
}

/// Fisher information matrix of `plan` for the listed free parameters.
///
/// Labels come back in canonical order regardless of the order of `free`.
pub fn fisher_matrix<T: Real>(
    model: &RamseyModel<T>,
    free: &[Param],
    plan: &MeasurementPlan<T>,
    vm: VarianceModel,
) -> Result<FisherMatrix<T>> {
    plan.validate()?;
    let labels = canonical_free(model, free)?;
    let points = plan.entries.iter().map(|e| {
        (
            e.time,
            e.quadrature,
            T::from_u64(e.shots).expect("shot count representable"),
        )
    });
    let matrix = accumulate(model, &labels, points, vm)?;
    Ok(FisherMatrix { labels, matrix })
}

/// Trace of the inverse after the condition-number guard, or an error naming the
/// weakest direction.
pub(crate) fn guarded_inverse<T: Real>(labels: &[Param], m: &Matrix<T>) -> Result<Matrix<T>> {
    let (vals, vecs) = linalg::symmetric_eigen(m);
    let lo = vals[0];
    let hi = *vals.last().expect("non-empty matrix");
    let limit = lit::<T>(MAX_CONDITION);
    if !(hi > T::zero()) || !(lo > T::zero()) || hi / lo > limit {
        let condition = if lo > T::zero() { to_f64(hi / lo) } else { f64::INFINITY };
        return Err(Error::NonIdentifiable {
            labels: labels.to_vec(),
            direction: vecs[0].iter().map(|&x| to_f64(x)).collect(),
            condition,
        });
    }
    linalg::invert(m).ok_or_else(|| Error::NonIdentifiable {
        labels: labels.to_vec(),
        direction: vecs[0].iter().map(|&x| to_f64(x)).collect(),
        condition: f64::INFINITY,
    })
}

/// Cramér–Rao bounds: diagonal of the inverse Fisher matrix and its trace.
pub fn crb<T: Real>(fi: &FisherMatrix<T>) -> Result<CrbResult<T>> {
    let n = fi.dim();
    if n == 0 || fi.matrix.len() != n || fi.matrix.iter().any(|r| r.len() != n) {
        return Err(Error::domain("Fisher matrix shape does not match its labels"));
    }
    let tol = lit::<T>(1e-12);
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (fi.matrix[i][j], fi.matrix[j][i]);
            if (a - b).abs() > tol * (a.abs().max(b.abs()).max(T::one())) {
                return Err(Error::domain("Fisher matrix is not symmetric"));
            }
        }
    }
    let inv = guarded_inverse(&fi.labels, &fi.matrix)?;
    let diag: Vec<T> = (0..n).map(|i| inv[i][i]).collect();
    let trace = diag.iter().copied().sum();
    Ok(CrbResult {
        labels: fi.labels.clone(),
        per_param_variance_bound: diag,
        trace_bound: trace,
    })
}

/// Closed-form bound for measuring X and Y at a single time with unit per-shot
/// variance: `e^{2γt} / (N t²)` for both ω and γ.
pub fn xy_single_time_crb<T: Real>(params: &QubitParams<T>, t: T, shots_per_quadrature: u64) -> Result<CrbResult<T>> {
    params.validate()?;
    if !(t > T::zero()) || !t.is_finite() {
        return Err(Error::domain("XY single-time bound diverges at t = 0"));
    }
    if shots_per_quadrature == 0 {
        return Err(Error::domain("at least one shot per quadrature is required"));
    }
    let n = T::from_u64(shots_per_quadrature).expect("shot count representable");
    let two = lit::<T>(2.0);
    let bound = (two * params.gamma * t).exp() / (n * t * t);
    Ok(CrbResult {
        labels: vec![Param::Omega, Param::Gamma],
        per_param_variance_bound: vec![bound, bound],
        trace_bound: bound + bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn entry(time: f64, quadrature: Quadrature, shots: u64) -> PlanEntry<f64> {
        PlanEntry {
            time,
            quadrature,
            shots,
        }
    }

    #[test]
    fn xy_plan_fisher_is_scaled_identity() {
        let m = RamseyModel::two_param(1.0, 1.0);
        let plan = MeasurementPlan::new(vec![entry(1.0, Quadrature::X, 500), entry(1.0, Quadrature::Y, 500)]).unwrap();
        let fi = fisher_matrix(&m, &[Param::Omega, Param::Gamma], &plan, VarianceModel::UnitShot).unwrap();
        let want = 500.0 * (-2.0f64).exp();
        assert_relative_eq!(fi.matrix[0][0], want, max_relative = 1e-14);
        assert_relative_eq!(fi.matrix[1][1], want, max_relative = 1e-14);
        assert!(fi.matrix[0][1].abs() < 1e-12);
        assert_relative_eq!(want, 67.668, epsilon = 1e-3);
    }

    #[test]
    fn time_zero_gives_zero_matrix() {
        let m = RamseyModel::two_param(1.0, 1.0);
        let plan = MeasurementPlan::new(vec![entry(0.0, Quadrature::X, 10)]).unwrap();
        let fi = fisher_matrix(&m, &[Param::Omega, Param::Gamma], &plan, VarianceModel::UnitShot).unwrap();
        assert!(fi.matrix.iter().flatten().all(|&x| x == 0.0));
        // binomial variance vanishes at t=0 together with the gradient: floored, not an error
        let fi = fisher_matrix(&m, &[Param::Omega, Param::Gamma], &plan, VarianceModel::Binomial).unwrap();
        assert!(fi.matrix.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn binomial_variance_with_live_gradient_is_singular() {
        let m = RamseyModel::pure_decay(1.0, 1.0);
        let plan = MeasurementPlan::new(vec![entry(0.0, Quadrature::X, 10)]).unwrap();
        let err = fisher_matrix(&m, &[Param::Amplitude, Param::Gamma], &plan, VarianceModel::Binomial);
        assert!(matches!(err, Err(Error::SingularVariance { .. })));
    }

    #[test]
    fn zero_shot_entries_are_rejected() {
        assert!(MeasurementPlan::new(vec![entry(1.0, Quadrature::X, 0)]).is_err());
        assert!(MeasurementPlan::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn crb_reference_values() {
        let d = 500.0 * (-2.0f64).exp();
        let fi = FisherMatrix {
            labels: vec![Param::Omega, Param::Gamma],
            matrix: vec![vec![d, 0.0], vec![0.0, d]],
        };
        let c = crb(&fi).unwrap();
        assert_relative_eq!(c.per_param_variance_bound[0], 0.0147781, epsilon = 1e-7);
        assert_relative_eq!(c.trace_bound, 0.0295562, epsilon = 1e-7);

        let id = FisherMatrix {
            labels: vec![Param::Omega, Param::Gamma],
            matrix: linalg::identity::<f64>(2),
        };
        let c = crb(&id).unwrap();
        assert_eq!(c.per_param_variance_bound, vec![1.0, 1.0]);
        assert_eq!(c.trace_bound, 2.0);
    }

    #[test]
    fn zero_matrix_is_non_identifiable() {
        let fi = FisherMatrix {
            labels: vec![Param::Omega, Param::Gamma],
            matrix: linalg::zeros::<f64>(2),
        };
        assert!(matches!(crb(&fi), Err(Error::NonIdentifiable { .. })));
    }

    #[test]
    fn near_singular_names_null_direction() {
        let fi = FisherMatrix {
            labels: vec![Param::Omega, Param::Gamma],
            matrix: vec![vec![1.0, 1.0], vec![1.0, 1.0 + 1e-14]],
        };
        match crb(&fi) {
            Err(Error::NonIdentifiable { direction, .. }) => {
                assert_relative_eq!(direction[0].abs(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-6);
                assert!(direction[0] * direction[1] < 0.0);
            }
            other => panic!("expected non-identifiable, got {other:?}"),
        }
    }

    #[test]
    fn xy_closed_form_values() {
        let c = xy_single_time_crb(&QubitParams { omega: 1.0, gamma: 1.0 }, 1.0, 500).unwrap();
        assert_relative_eq!(c.per_param_variance_bound[0], 0.0147781, epsilon = 1e-7);
        let e2 = 1f64.exp().powi(2);
        let a = xy_single_time_crb(&QubitParams { omega: 0.3, gamma: 2.0 }, 0.5, 700).unwrap();
        assert_relative_eq!(a.per_param_variance_bound[1], e2 * 4.0 / 700.0, max_relative = 1e-14);
        assert!(xy_single_time_crb(&QubitParams { omega: 1.0, gamma: 1.0 }, 0.0, 500).is_err());
    }

    #[test]
    fn pure_decay_with_free_omega_is_rejected() {
        let m = RamseyModel::pure_decay(1.0, 1.0);
        let plan = MeasurementPlan::new(vec![entry(1.0, Quadrature::X, 10)]).unwrap();
        assert!(fisher_matrix(&m, &[Param::Omega, Param::Gamma], &plan, VarianceModel::UnitShot).is_err());
    }
}
