//! Measurement-schedule optimization.
//!
//! [`optimize_plan`] searches jointly over up to `max_times` measurement times
//! and a continuous allocation of shots (per time and quadrature) minimizing
//! `Tr I⁻¹`, then merges times closer than the merge tolerance and rounds the
//! allocation to integer shots. Times live on a sigmoid map of the bounds and
//! shot fractions on a softmax, so the search itself is unconstrained.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{accumulate, canonical_free, guarded_inverse, MeasurementPlan, PlanEntry, VarianceModel};
use crate::scalar::{lit, to_f64, Real};
use crate::signal::{expectation, ModelFamily, Param, Quadrature, RamseyModel};
use crate::simplex::NelderMead;
use crate::stream::rng_for;

/// Relative objective slack allowed when shrinking the support of a design.
const SUPPORT_REDUCTION_TOL: f64 = 1e-4;
/// Width in `ln(ω/γ)` of the bins memoizing two-time designs.
const TWO_TIME_BIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Sum of the per-parameter Cramér–Rao bounds.
    #[default]
    TraceCrb,
}

/// How shots are spread over the surviving (time, quadrature) entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShotAllocation {
    /// Shot fractions are optimized together with the times.
    #[default]
    Free,
    /// Times come from the free optimum; shots are then split equally.
    Equal,
    /// Shots are held equal while the times are optimized.
    EqualPinned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub max_times: usize,
    pub total_shots: u64,
    pub merge_tolerance: f64,
    pub quadratures: Vec<Quadrature>,
    pub objective: Objective,
    pub optimizer_restarts: usize,
    /// Absolute `(t_min, t_max)`; `None` means `(1e-3/γ, 10/γ)` of the guess.
    pub time_bounds: Option<(f64, f64)>,
    /// `None` picks the model's default, see [`default_variance`].
    pub variance: Option<VarianceModel>,
    pub shots: ShotAllocation,
    pub seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            max_times: 10,
            total_shots: 1000,
            merge_tolerance: 0.01,
            quadratures: vec![Quadrature::X],
            objective: Objective::TraceCrb,
            optimizer_restarts: 8,
            time_bounds: None,
            variance: None,
            shots: ShotAllocation::Free,
            seed: 0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_times < 2 {
            return Err(Error::Config("max_times must be at least 2".into()));
        }
        if self.total_shots == 0 {
            return Err(Error::Config("total_shots must be positive".into()));
        }
        if !(self.merge_tolerance > 0.0) {
            return Err(Error::Config("merge_tolerance must be positive".into()));
        }
        if self.quadratures.is_empty() {
            return Err(Error::Config("quadrature set is empty".into()));
        }
        if self.optimizer_restarts == 0 {
            return Err(Error::Config("optimizer_restarts must be positive".into()));
        }
        if let Some((lo, hi)) = self.time_bounds {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(Error::Config(format!("invalid time bounds ({lo}, {hi})")));
            }
        }
        Ok(())
    }
}

/// Variance model used when the config does not pin one.
///
/// Ramsey models use the binomial per-shot variance of a ±1 outcome. The pure
/// decay reference model uses unit variance, as in the NMR design literature;
/// at `A = 1` the binomial variance also vanishes at `t = 0`.
pub fn default_variance<T: Real>(model: &RamseyModel<T>) -> VarianceModel {
    match model.family() {
        ModelFamily::PureDecay => VarianceModel::UnitShot,
        ModelFamily::TwoParam | ModelFamily::FiveParam => VarianceModel::Binomial,
    }
}

/// Baseline strategies compared throughout the benchmarks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StrategyKind<T = f64> {
    EquallySpacedX {
        n_times: usize,
    },
    TwoTimeOptimalX,
    #[serde(rename = "single-time-xy")]
    SingleTimeXY,
    Custom {
        plan: MeasurementPlan<T>,
    },
}

impl<T> StrategyKind<T> {
    pub fn label(&self) -> String {
        match self {
            StrategyKind::EquallySpacedX { n_times } => format!("equally-spaced-x-{n_times}"),
            StrategyKind::TwoTimeOptimalX => "two-time-optimal-x".into(),
            StrategyKind::SingleTimeXY => "single-time-xy".into(),
            StrategyKind::Custom { .. } => "custom".into(),
        }
    }

    /// Whether the strategy probes only the X quadrature.
    pub fn x_only(&self) -> bool {
        matches!(
            self,
            StrategyKind::EquallySpacedX { .. } | StrategyKind::TwoTimeOptimalX
        )
    }
}

/// One measurement time with its share of the budget per quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSlot<T> {
    pub time: T,
    pub weights: Vec<(Quadrature, T)>,
}

impl<T: Real> DesignSlot<T> {
    pub fn total_weight(&self) -> T {
        self.weights.iter().map(|w| w.1).sum()
    }
}

/// Continuous (pre-rounding) design; weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousDesign<T> {
    pub slots: Vec<DesignSlot<T>>,
    /// `Tr I⁻¹` at the configured total shot count.
    pub objective: T,
}

struct Problem<'a, T> {
    model: &'a RamseyModel<T>,
    free: Vec<Param>,
    vm: VarianceModel,
    t_lo: T,
    t_hi: T,
    pinned: bool,
}

/// Rejects guesses whose expectation leaves `[-1, 1]` on the search window.
fn check_physical<T: Real>(model: &RamseyModel<T>, quads: &[Quadrature], t_lo: T, t_hi: T) -> Result<()> {
    const GRID: usize = 256;
    for &q in quads {
        for k in 0..=GRID {
            let t = t_lo + (t_hi - t_lo) * lit::<T>(k as f64 / GRID as f64);
            let mu = to_f64(expectation(model, q, t)?);
            if !(mu.abs() <= 1.0 + 1e-12) {
                return Err(Error::UnphysicalModel {
                    value: mu,
                    time: to_f64(t),
                });
            }
        }
    }
    Ok(())
}

impl<'a, T: Real> Problem<'a, T> {
    fn new(model: &'a RamseyModel<T>, free: &[Param], cfg: &PlannerConfig) -> Result<Self> {
        cfg.validate()?;
        model.validate()?;
        let free = canonical_free(model, free).map_err(|e| Error::Planner(e.to_string()))?;
        let (t_lo, t_hi) = resolve_bounds(model, cfg)?;
        check_physical(model, &cfg.quadratures, t_lo, t_hi)?;
        Ok(Problem {
            model,
            free,
            vm: cfg.variance.unwrap_or_else(|| default_variance(model)),
            t_lo,
            t_hi,
            pinned: cfg.shots == ShotAllocation::EqualPinned,
        })
    }

    /// `Tr I⁻¹` for a unit budget; +∞ when not identifiable.
    fn trace(&self, slots: &[DesignSlot<T>]) -> T {
        let points = slots
            .iter()
            .flat_map(|s| s.weights.iter().map(move |&(q, w)| (s.time, q, w)));
        let m = match accumulate(self.model, &self.free, points, self.vm) {
            Ok(m) => m,
            Err(_) => return T::infinity(),
        };
        match guarded_inverse(&self.free, &m) {
            Ok(inv) => (0..inv.len()).map(|i| inv[i][i]).sum(),
            Err(_) => T::infinity(),
        }
    }

    fn time_of(&self, u: T) -> T {
        let s = T::one() / (T::one() + (-u).exp());
        self.t_lo + (self.t_hi - self.t_lo) * s
    }

    fn coord_of(&self, t: T) -> T {
        let eps = lit::<T>(1e-12);
        let s = ((t - self.t_lo) / (self.t_hi - self.t_lo)).max(eps).min(T::one() - eps);
        (s / (T::one() - s)).ln()
    }

    /// Decodes `[times..., logits...]` under `layout` (active quadratures per slot).
    fn decode(&self, layout: &[Vec<Quadrature>], x: &[T]) -> Vec<DesignSlot<T>> {
        let k = layout.len();
        if self.pinned {
            let slots = layout
                .iter()
                .enumerate()
                .map(|(i, qs)| DesignSlot {
                    time: self.time_of(x[i]),
                    weights: qs.iter().map(|&q| (q, T::one())).collect(),
                })
                .collect();
            return equalize(slots);
        }
        let logits = &x[k..];
        let mx = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = logits.iter().map(|&v| (v - mx).exp()).collect();
        let z: T = exps.iter().copied().sum();
        let mut it = exps.into_iter();
        layout
            .iter()
            .enumerate()
            .map(|(i, qs)| DesignSlot {
                time: self.time_of(x[i]),
                weights: qs.iter().map(|&q| (q, it.next().expect("layout size") / z)).collect(),
            })
            .collect()
    }

    fn encode(&self, slots: &[DesignSlot<T>]) -> (Vec<Vec<Quadrature>>, Vec<T>) {
        let layout = slots.iter().map(|s| s.weights.iter().map(|w| w.0).collect()).collect();
        let mut x: Vec<T> = slots.iter().map(|s| self.coord_of(s.time)).collect();
        if self.pinned {
            return (layout, x);
        }
        let floor = lit::<T>(1e-300);
        x.extend(
            slots
                .iter()
                .flat_map(|s| s.weights.iter().map(move |w| w.1.max(floor).ln())),
        );
        (layout, x)
    }

    fn optimize_from(
        &self,
        layout: &[Vec<Quadrature>],
        x0: &[T],
        step: T,
        evals_per_dim: usize,
    ) -> (Vec<DesignSlot<T>>, T) {
        let nm = NelderMead {
            max_evals: evals_per_dim * x0.len().max(1),
            ftol: 1e-13,
            xtol: 1e-9,
            adaptive: true,
        };
        let r = nm.minimize(|x: &[T]| self.trace(&self.decode(layout, x)), x0, step);
        let slots = self.decode(layout, &r.x);
        let value = self.trace(&slots);
        (slots, value)
    }

    fn polish(&self, slots: &[DesignSlot<T>]) -> (Vec<DesignSlot<T>>, T) {
        let (layout, x0) = self.encode(slots);
        // two passes: a coarse restart around the incoming point, then a fine one
        let (s1, _) = self.optimize_from(&layout, &x0, lit(0.25), 800);
        let (layout, x1) = self.encode(&s1);
        self.optimize_from(&layout, &x1, lit(0.02), 800)
    }
}

fn sort_slots<T: Real>(slots: &mut [DesignSlot<T>]) {
    slots.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap_or(std::cmp::Ordering::Equal));
}

fn merge_slot_pair<T: Real>(a: &DesignSlot<T>, b: &DesignSlot<T>) -> DesignSlot<T> {
    let mut weights = a.weights.clone();
    for &(q, w) in &b.weights {
        match weights.iter_mut().find(|e| e.0 == q) {
            Some(e) => e.1 = e.1 + w,
            None => weights.push((q, w)),
        }
    }
    weights.sort_by_key(|e| e.0);
    DesignSlot {
        time: (a.time + b.time) / lit(2.0),
        weights,
    }
}

/// Merges adjacent times closer than `delta` until no such pair remains.
pub(crate) fn merge_to_fixpoint<T: Real>(mut slots: Vec<DesignSlot<T>>, delta: T) -> Vec<DesignSlot<T>> {
    sort_slots(&mut slots);
    loop {
        let pos = slots.windows(2).position(|w| (w[1].time - w[0].time).abs() < delta);
        match pos {
            Some(i) => {
                let merged = merge_slot_pair(&slots[i], &slots[i + 1]);
                slots.splice(i..=i + 1, std::iter::once(merged));
                sort_slots(&mut slots);
            }
            None => return slots,
        }
    }
}

/// Gives every (time, quadrature) entry the same weight.
fn equalize<T: Real>(mut slots: Vec<DesignSlot<T>>) -> Vec<DesignSlot<T>> {
    let n: usize = slots.iter().map(|s| s.weights.len()).sum();
    let w = T::one() / lit::<T>(n.max(1) as f64);
    for s in &mut slots {
        for e in &mut s.weights {
            e.1 = w;
        }
    }
    slots
}

/// Drops (time, quadrature) weights that would round to no shots and renormalizes.
fn prune<T: Real>(slots: Vec<DesignSlot<T>>, total_shots: u64) -> Vec<DesignSlot<T>> {
    let cut = lit::<T>(0.5 / total_shots as f64);
    let mut out: Vec<DesignSlot<T>> = slots
        .into_iter()
        .filter_map(|mut s| {
            s.weights.retain(|w| w.1 >= cut);
            (!s.weights.is_empty()).then_some(s)
        })
        .collect();
    let z: T = out.iter().map(|s| s.total_weight()).sum();
    if z > T::zero() {
        for s in &mut out {
            for w in &mut s.weights {
                w.1 = w.1 / z;
            }
        }
    }
    out
}

/// Largest-remainder rounding of `weights` to integers summing to `total`.
pub fn allocate_shots<T: Real>(weights: &[T], total: u64) -> Vec<u64> {
    let z: f64 = weights.iter().map(|&w| to_f64(w).max(0.0)).sum();
    if weights.is_empty() || !(z > 0.0) {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|&w| to_f64(w).max(0.0) / z * total as f64).collect();
    let mut shots: Vec<u64> = exact.iter().map(|e| e.floor() as u64).collect();
    let assigned: u64 = shots.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().take((total - assigned) as usize) {
        shots[i] += 1;
    }
    shots
}

fn resolve_bounds<T: Real>(model: &RamseyModel<T>, cfg: &PlannerConfig) -> Result<(T, T)> {
    if let Some((lo, hi)) = cfg.time_bounds {
        return Ok((lit(lo), lit(hi)));
    }
    let g = model.gamma();
    if !(g > T::zero()) {
        return Err(Error::Planner(
            "default time bounds need a positive dephasing-rate guess; set time_bounds".into(),
        ));
    }
    Ok((lit::<T>(1e-3) / g, lit::<T>(10.0) / g))
}

/// Continuous optimum of the design problem, before integer rounding.
pub fn optimize_design<T: Real>(
    model: &RamseyModel<T>,
    free: &[Param],
    cfg: &PlannerConfig,
) -> Result<ContinuousDesign<T>> {
    let problem = Problem::new(model, free, cfg)?;
    let free = problem.free.clone();
    let (t_lo, t_hi) = (problem.t_lo, problem.t_hi);
    let mut quads = cfg.quadratures.clone();
    quads.sort();
    quads.dedup();
    let tidy = |slots: Vec<DesignSlot<T>>| -> Vec<DesignSlot<T>> {
        let slots = prune(merge_to_fixpoint(slots, lit(cfg.merge_tolerance)), cfg.total_shots);
        if problem.pinned {
            equalize(slots)
        } else {
            slots
        }
    };
    let n_total = lit::<T>(cfg.total_shots as f64);
    let k = cfg.max_times;
    let layout: Vec<Vec<Quadrature>> = vec![quads.clone(); k];

    // stratified multistart in log-time across the informative window
    let scale = T::one() / model.gamma().max(lit(1e-12));
    let log_lo = t_lo.max(lit::<T>(0.05) * scale).min(t_hi).ln();
    let log_hi = t_hi.min(lit::<T>(5.0) * scale).max(t_lo).ln();
    let starts: Vec<Vec<T>> = (0..cfg.optimizer_restarts)
        .map(|r| {
            let mut rng = rng_for(&[cfg.seed, 0x504c_414e, r as u64]);
            let mut x = Vec::with_capacity(k * (1 + quads.len()));
            for i in 0..k {
                let jitter = if r == 0 { 0.5 } else { rng.random::<f64>() };
                let frac = lit::<T>((i as f64 + jitter) / k as f64);
                let t = (log_lo + (log_hi - log_lo) * frac).exp();
                x.push(problem.coord_of(t));
            }
            for _ in 0..if problem.pinned { 0 } else { k * quads.len() } {
                let z: f64 = if r == 0 { 0.0 } else { rng.sample(StandardNormal) };
                x.push(lit(0.3 * z));
            }
            x
        })
        .collect();

    let runs: Vec<(Vec<DesignSlot<T>>, T)> = starts
        .par_iter()
        .map(|x0| problem.optimize_from(&layout, x0, lit(1.0), 600))
        .collect();
    let (mut best, mut best_val) = runs
        .into_iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
        .expect("at least one restart");
    if !best_val.is_finite() {
        return Err(Error::Planner(format!(
            "no identifiable design for free parameters {:?} with quadratures {:?}",
            free, quads
        )));
    }

    let settle = |slots: Vec<DesignSlot<T>>| -> (Vec<DesignSlot<T>>, T) {
        let (slots, _) = problem.polish(&tidy(slots));
        let slots = tidy(slots);
        let v = problem.trace(&slots);
        (slots, v)
    };
    let (s, v) = settle(best);
    best = s;
    best_val = v;

    // shrink the support while the objective holds
    let slack = T::one() + lit::<T>(SUPPORT_REDUCTION_TOL);
    while best.len() > 1 {
        let mut candidates: Vec<Vec<DesignSlot<T>>> = Vec::new();
        for i in 0..best.len() {
            let mut c = best.clone();
            c.remove(i);
            candidates.push(c);
        }
        for i in 0..best.len() - 1 {
            let mut c = best.clone();
            let merged = merge_slot_pair(&c[i], &c[i + 1]);
            c.splice(i..=i + 1, std::iter::once(merged));
            candidates.push(c);
        }
        let evaluated: Vec<(Vec<DesignSlot<T>>, T)> = candidates
            .into_par_iter()
            .map(|c| {
                let c = tidy(c);
                if c.is_empty() {
                    return (c, T::infinity());
                }
                settle(c)
            })
            .collect();
        let (cand, val) = evaluated
            .into_iter()
            .min_by(|a, b| {
                a.1.partial_cmp(&b.1)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.0.len().cmp(&b.0.len()))
            })
            .expect("candidates");
        if val.is_finite() && val <= best_val * slack && cand.len() < best.len() {
            best = cand;
            best_val = val.min(best_val);
        } else {
            break;
        }
    }

    let (slots, val) = problem.polish(&best);
    let slots = tidy(slots);
    let val = if slots.len() == best.len() {
        val.min(problem.trace(&slots))
    } else {
        problem.trace(&slots)
    };
    let (slots, val) = if val <= best_val {
        (slots, val)
    } else {
        (best, best_val)
    };
    Ok(ContinuousDesign {
        slots,
        objective: val / n_total,
    })
}

/// Optimal measurement plan for `model` (whose values serve as the parameter guess).
pub fn optimize_plan<T: Real>(
    model: &RamseyModel<T>,
    free: &[Param],
    cfg: &PlannerConfig,
) -> Result<MeasurementPlan<T>> {
    let design = optimize_design(model, free, cfg)?;
    plan_from_design(&design, cfg)
}

fn plan_from_design<T: Real>(design: &ContinuousDesign<T>, cfg: &PlannerConfig) -> Result<MeasurementPlan<T>> {
    let mut flat: Vec<(T, Quadrature, T)> = design
        .slots
        .iter()
        .flat_map(|s| s.weights.iter().map(move |&(q, w)| (s.time, q, w)))
        .collect();
    if cfg.shots != ShotAllocation::Free {
        for e in &mut flat {
            e.2 = T::one();
        }
    }
    let weights: Vec<T> = flat.iter().map(|e| e.2).collect();
    let shots = allocate_shots(&weights, cfg.total_shots);
    let entries: Vec<PlanEntry<T>> = flat
        .iter()
        .zip(shots)
        .filter(|(_, s)| *s > 0)
        .map(|(&(time, quadrature, _), shots)| PlanEntry {
            time,
            quadrature,
            shots,
        })
        .collect();
    MeasurementPlan::new(entries)
}

/// Optimal single time for measuring X and Y together: `1/γ`.
pub fn optimal_xy_time<T: Real>(gamma: T) -> Result<T> {
    if !(gamma > T::zero()) || !gamma.is_finite() {
        return Err(Error::domain(format!("dephasing rate must be positive, got {gamma}")));
    }
    Ok(T::one() / gamma)
}

/// Ratio `s₁/s₂` of the continuous shot allocation between the earlier and the
/// later of the two optimal X-only times, at `γ = ratio·|ω|`.
pub fn shot_ratio<T: Real>(model: &RamseyModel<T>, gamma_over_omega: T, cfg: &PlannerConfig) -> Result<T> {
    let omega = model.get(Param::Omega)?;
    if omega == T::zero() {
        return Err(Error::domain("shot ratio needs a non-zero detuning"));
    }
    if !(gamma_over_omega > T::zero()) {
        return Err(Error::domain("γ/ω must be positive"));
    }
    let m = model.with(Param::Gamma, gamma_over_omega * omega.abs())?;
    let cfg = PlannerConfig {
        quadratures: vec![Quadrature::X],
        shots: ShotAllocation::Free,
        ..cfg.clone()
    };
    let design = optimize_design(&m, &[Param::Omega, Param::Gamma], &cfg)?;
    if design.slots.len() != 2 {
        return Err(Error::Planner(format!(
            "expected two surviving times, found {}",
            design.slots.len()
        )));
    }
    Ok(design.slots[0].total_weight() / design.slots[1].total_weight())
}

/// Default equally-spaced span `[t_max/20, t_max]` with `t_max = 3/γ`.
pub fn default_time_span<T: Real>(gamma: T) -> Result<(T, T)> {
    if !(gamma > T::zero()) {
        return Err(Error::domain("default time span needs a positive dephasing rate"));
    }
    let hi = lit::<T>(3.0) / gamma;
    Ok((hi / lit(20.0), hi))
}

/// Planner settings behind [`StrategyKind::TwoTimeOptimalX`].
pub fn two_time_config(total_shots: u64) -> PlannerConfig {
    PlannerConfig {
        max_times: 2,
        total_shots,
        quadratures: vec![Quadrature::X],
        optimizer_restarts: 4,
        shots: ShotAllocation::Equal,
        ..PlannerConfig::default()
    }
}

/// Designs for `TwoParam(ω/γ, 1)` at log-binned ratios, by bin and budget.
type CanonicalDesign = Vec<(f64, Vec<(Quadrature, f64)>)>;

fn two_time_memo() -> &'static Mutex<HashMap<(i64, u64), Arc<CanonicalDesign>>> {
    static MEMO: OnceLock<Mutex<HashMap<(i64, u64), Arc<CanonicalDesign>>>> = OnceLock::new();
    MEMO.get_or_init(Default::default)
}

/// Two-time design for `guess`: the optimum at the nearest ratio bin, rescaled
/// to the guess's dephasing rate and refined locally. Falls back to the full
/// search when the guess is not a two-parameter model or the refinement
/// changes the support.
fn two_time_design<T: Real>(
    guess: &RamseyModel<T>,
    free: &[Param],
    cfg: &PlannerConfig,
) -> Result<ContinuousDesign<T>> {
    let (w, g) = (to_f64(guess.get(Param::Omega)?).abs(), to_f64(guess.gamma()));
    let ratio = w / g;
    if guess.family() != ModelFamily::TwoParam || !(ratio > 0.0 && ratio.is_finite()) {
        return optimize_design(guess, free, cfg);
    }
    let bin = (ratio.ln() / TWO_TIME_BIN).round() as i64;
    let key = (bin, cfg.total_shots);
    let cached = two_time_memo().lock().expect("memo lock").get(&key).cloned();
    let canonical = match cached {
        Some(c) => c,
        None => {
            let m = RamseyModel::two_param((bin as f64 * TWO_TIME_BIN).exp(), 1.0);
            let d = optimize_design(&m, free, cfg)?;
            let c: CanonicalDesign = d.slots.iter().map(|s| (s.time, s.weights.clone())).collect();
            let c = Arc::new(c);
            two_time_memo()
                .lock()
                .expect("memo lock")
                .entry(key)
                .or_insert(c)
                .clone()
        }
    };
    let problem = Problem::new(guess, free, cfg)?;
    let scale = lit::<T>(g);
    let start: Vec<DesignSlot<T>> = canonical
        .iter()
        .map(|(t, ws)| DesignSlot {
            time: lit::<T>(*t) / scale,
            weights: ws.iter().map(|&(q, w)| (q, lit(w))).collect(),
        })
        .collect();
    let (layout, x0) = problem.encode(&start);
    let (slots, _) = problem.optimize_from(&layout, &x0, lit(0.05), 300);
    let slots = prune(merge_to_fixpoint(slots, lit(cfg.merge_tolerance)), cfg.total_shots);
    if slots.len() != canonical.len() {
        return optimize_design(guess, free, cfg);
    }
    let objective = problem.trace(&slots) / lit(cfg.total_shots as f64);
    Ok(ContinuousDesign { slots, objective })
}

/// Builds the plan a strategy prescribes for a parameter guess.
pub fn build_strategy<T: Real>(
    kind: &StrategyKind<T>,
    guess: &RamseyModel<T>,
    total_shots: u64,
    time_span: Option<(T, T)>,
) -> Result<MeasurementPlan<T>> {
    if total_shots == 0 {
        return Err(Error::Infeasible("total shot budget is zero".into()));
    }
    match kind {
        StrategyKind::EquallySpacedX { n_times } => {
            let n = *n_times;
            if n < 2 {
                return Err(Error::domain("equally spaced strategy needs at least two times"));
            }
            if n as u64 > total_shots {
                return Err(Error::Infeasible(format!("{n} times but only {total_shots} shots")));
            }
            let (lo, hi) = match time_span {
                Some(span) => span,
                None => default_time_span(guess.gamma())?,
            };
            if !(lo >= T::zero() && hi > lo) {
                return Err(Error::domain("invalid time span"));
            }
            let shots = allocate_shots(&vec![T::one(); n], total_shots);
            let step = (hi - lo) / lit((n - 1) as f64);
            let entries = shots
                .into_iter()
                .enumerate()
                .map(|(i, s)| PlanEntry {
                    time: lo + step * lit(i as f64),
                    quadrature: Quadrature::X,
                    shots: s,
                })
                .collect();
            MeasurementPlan::new(entries)
        }
        StrategyKind::TwoTimeOptimalX => {
            if total_shots < 2 {
                return Err(Error::Infeasible("two times need at least two shots".into()));
            }
            let mut cfg = two_time_config(total_shots);
            if let Some((lo, hi)) = time_span {
                cfg.time_bounds = Some((to_f64(lo).max(1e-9), to_f64(hi)));
            }
            let free: Vec<Param> = [Param::Omega, Param::Gamma]
                .into_iter()
                .filter(|&p| guess.has_param(p))
                .collect();
            if time_span.is_some() {
                return optimize_plan(guess, &free, &cfg);
            }
            plan_from_design(&two_time_design(guess, &free, &cfg)?, &cfg)
        }
        StrategyKind::SingleTimeXY => {
            if total_shots < 2 {
                return Err(Error::Infeasible("two quadratures need at least two shots".into()));
            }
            let t = optimal_xy_time(guess.gamma())?;
            let y = total_shots / 2;
            let x = total_shots - y;
            MeasurementPlan::new(vec![
                PlanEntry {
                    time: t,
                    quadrature: Quadrature::X,
                    shots: x,
                },
                PlanEntry {
                    time: t,
                    quadrature: Quadrature::Y,
                    shots: y,
                },
            ])
        }
        StrategyKind::Custom { plan } => {
            plan.validate()?;
            Ok(plan.clone())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn largest_remainder_preserves_budget() {
        let s = allocate_shots(&[1.0, 1.0, 1.0], 1000);
        assert_eq!(s.iter().sum::<u64>(), 1000);
        assert_eq!(s, vec![334, 333, 333]);
        let s = allocate_shots(&[0.2, 0.5, 0.3], 7);
        assert_eq!(s.iter().sum::<u64>(), 7);
    }

    #[test]
    fn merge_cascades_to_fixpoint() {
        let slot = |t: f64| DesignSlot {
            time: t,
            weights: vec![(Quadrature::X, 0.25)],
        };
        let merged = merge_to_fixpoint(vec![slot(1.0), slot(1.006), slot(1.012), slot(2.0)], 0.01);
        assert_eq!(merged.len(), 2);
        assert!((merged[0].total_weight() - 0.75).abs() < 1e-15);
        for w in merged.windows(2) {
            assert!(w[1].time - w[0].time >= 0.01);
        }
    }

    #[test]
    fn unphysical_guess_is_rejected() {
        let m = RamseyModel::five_param(0.8, 0.5, 0.0, 1.0, 1.0);
        let err = optimize_plan(&m, &[Param::Omega, Param::Gamma], &PlannerConfig::default());
        assert!(matches!(err, Err(Error::UnphysicalModel { .. })));
    }

    #[test]
    fn optimal_xy_time_values() {
        assert_eq!(optimal_xy_time(1.0).unwrap(), 1.0);
        assert_eq!(optimal_xy_time(2.0).unwrap(), 0.5);
        assert!((optimal_xy_time(0.135f64).unwrap() - 7.40741).abs() < 1e-5);
        assert!(optimal_xy_time(0.0).is_err());
        assert!(optimal_xy_time(-1.0).is_err());
    }

    #[test]
    fn equally_spaced_and_xy_strategies() {
        let g = RamseyModel::two_param(1.0f64, 1.0);
        let p = build_strategy(&StrategyKind::EquallySpacedX { n_times: 20 }, &g, 2000, None).unwrap();
        assert_eq!(p.entries.len(), 20);
        assert!(p.entries.iter().all(|e| e.shots == 100));
        assert!((p.entries[0].time - 0.15).abs() < 1e-12 && (p.entries[19].time - 3.0).abs() < 1e-12);

        let p = build_strategy(&StrategyKind::SingleTimeXY, &g, 1000, None).unwrap();
        assert_eq!(
            p.entries,
            vec![
                PlanEntry {
                    time: 1.0,
                    quadrature: Quadrature::X,
                    shots: 500
                },
                PlanEntry {
                    time: 1.0,
                    quadrature: Quadrature::Y,
                    shots: 500
                },
            ]
        );
        assert!(matches!(
            build_strategy(&StrategyKind::EquallySpacedX { n_times: 20 }, &g, 10, None),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn config_validation() {
        let bad = PlannerConfig {
            max_times: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = PlannerConfig {
            time_bounds: Some((1.0, 0.5)),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = PlannerConfig {
            merge_tolerance: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn non_identifiable_request_fails() {
        let m = RamseyModel::pure_decay(1.0, 1.0);
        assert!(matches!(
            optimize_plan(&m, &[Param::Omega, Param::Gamma], &PlannerConfig::default()),
            Err(Error::Planner(_))
        ));
    }
}
