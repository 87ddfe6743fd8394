//! Monte Carlo sweeps: RMSE against shot budget, robustness to a mismatched
//! dephasing guess, crosstalk-protocol scaling with chain length, and the
//! two-time shot-ratio curve. Every sweep is a pure function of its spec.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::crosstalk::{
    build_chain_protocol, run_protocol, ChainParams, GuessPolicy, ProtocolOptions, SampleMode, Target,
};
use crate::error::{Error, Result};
use crate::estimator::fit_least_squares;
use crate::fisher::{crb, fisher_matrix, MeasurementPlan, VarianceModel};
use crate::planner::{build_strategy, shot_ratio, PlannerConfig, StrategyKind};
use crate::sampler::sample_keyed;
use crate::signal::{Param, RamseyModel};
use crate::stream::derive_seed;

/// Share of failed trials above which a row is flagged.
pub const FAILURE_FLAG: f64 = 0.05;

const MIN_TRIALS: usize = 30;

pub fn default_strategies() -> Vec<StrategyKind> {
    vec![
        StrategyKind::SingleTimeXY,
        StrategyKind::TwoTimeOptimalX,
        StrategyKind::EquallySpacedX { n_times: 20 },
    ]
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(Error::Config(format!(
            "trials must be at least {MIN_TRIALS}, got {trials}"
        )));
    }
    Ok(())
}

fn check_strategies(s: &[StrategyKind]) -> Result<()> {
    if s.is_empty() {
        return Err(Error::Config("strategy set is empty".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetSweep {
    pub strategies: Vec<StrategyKind>,
    pub budgets: Vec<u64>,
    pub trials: usize,
    pub omega: f64,
    pub gamma: f64,
    pub guess: GuessPolicy,
    /// Span of the equally spaced baseline; defaults to `[t_max/20, t_max]`, `t_max = 3/γ_guess`.
    pub time_span: Option<(f64, f64)>,
    pub seed: u64,
}

impl Default for BudgetSweep {
    fn default() -> Self {
        BudgetSweep {
            strategies: default_strategies(),
            budgets: vec![1_000, 10_000, 100_000],
            trials: 500,
            omega: 1.0,
            gamma: 1.0,
            guess: GuessPolicy::Exact,
            time_span: None,
            seed: 0,
        }
    }
}

impl BudgetSweep {
    pub fn validate(&self) -> Result<()> {
        check_strategies(&self.strategies)?;
        check_trials(self.trials)?;
        if self.budgets.is_empty() || self.budgets.windows(2).any(|w| w[1] <= w[0]) || self.budgets[0] == 0 {
            return Err(Error::Config("budgets must be positive and strictly increasing".into()));
        }
        truth_model(self.omega, self.gamma)?;
        self.guess.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessSweep {
    pub strategies: Vec<StrategyKind>,
    pub omega: f64,
    pub gamma_guess: f64,
    /// True dephasing rates as multiples of the guess.
    pub gamma_factors: Vec<f64>,
    pub budget: u64,
    pub trials: usize,
    pub time_span: Option<(f64, f64)>,
    pub seed: u64,
}

impl Default for RobustnessSweep {
    fn default() -> Self {
        RobustnessSweep {
            strategies: default_strategies(),
            omega: 1.0,
            gamma_guess: 1.0,
            gamma_factors: vec![0.5, 0.63, 0.79, 1.0, 1.26, 1.59, 2.0],
            budget: 10_000,
            trials: 500,
            time_span: None,
            seed: 0,
        }
    }
}

impl RobustnessSweep {
    pub fn validate(&self) -> Result<()> {
        check_strategies(&self.strategies)?;
        check_trials(self.trials)?;
        if self.gamma_factors.is_empty() || self.gamma_factors.iter().any(|&f| !(f > 0.0 && f.is_finite())) {
            return Err(Error::Config("gamma_factors must be positive".into()));
        }
        if self.budget == 0 {
            return Err(Error::Config("budget must be positive".into()));
        }
        truth_model(self.omega, self.gamma_guess)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrosstalkSweep {
    pub strategies: Vec<StrategyKind>,
    pub n_qubits: Vec<usize>,
    /// `(mean, std)` of the normal draws.
    pub omega: (f64, f64),
    pub gamma: (f64, f64),
    pub coupling: (f64, f64),
    pub budget_per_qubit: u64,
    pub trials: usize,
    pub guess: GuessPolicy,
    pub seed: u64,
}

impl Default for CrosstalkSweep {
    fn default() -> Self {
        CrosstalkSweep {
            strategies: default_strategies(),
            n_qubits: vec![4, 8, 16, 24],
            omega: (1.0, 0.2),
            gamma: (1.0, 0.2),
            coupling: (0.5, 1.0),
            budget_per_qubit: 10_000,
            trials: 200,
            guess: GuessPolicy::Exact,
            seed: 0,
        }
    }
}

impl CrosstalkSweep {
    pub fn validate(&self) -> Result<()> {
        check_strategies(&self.strategies)?;
        check_trials(self.trials)?;
        if self.n_qubits.is_empty() || self.n_qubits.iter().any(|&n| n < 2) {
            return Err(Error::Config("every chain needs at least two qubits".into()));
        }
        if self.budget_per_qubit == 0 {
            return Err(Error::Config("budget_per_qubit must be positive".into()));
        }
        for (name, (_, s)) in [
            ("omega", self.omega),
            ("gamma", self.gamma),
            ("coupling", self.coupling),
        ] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("{name} std must be finite and non-negative")));
            }
        }
        self.guess.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShotRatioSweep {
    pub gamma_over_omega: Vec<f64>,
    pub omega: f64,
    pub planner: PlannerConfig,
}

impl Default for ShotRatioSweep {
    fn default() -> Self {
        ShotRatioSweep {
            gamma_over_omega: vec![0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0],
            omega: 1.0,
            planner: PlannerConfig {
                max_times: 2,
                ..PlannerConfig::default()
            },
        }
    }
}

impl ShotRatioSweep {
    pub fn validate(&self) -> Result<()> {
        if self.gamma_over_omega.is_empty() || self.gamma_over_omega.iter().any(|&r| !(r > 0.0 && r <= 4.0)) {
            return Err(Error::Config("gamma_over_omega values must lie in (0, 4]".into()));
        }
        if !(self.omega != 0.0 && self.omega.is_finite()) {
            return Err(Error::Config("omega must be finite and non-zero".into()));
        }
        self.planner.validate()
    }
}

/// Any sweep, tagged by kind; this is what the spec hash covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "sweep", rename_all = "kebab-case")]
pub enum SweepSpec {
    RmseVsBudget(BudgetSweep),
    Robustness(RobustnessSweep),
    CrosstalkScaling(CrosstalkSweep),
    ShotRatio(ShotRatioSweep),
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            SweepSpec::RmseVsBudget(s) => s.validate(),
            SweepSpec::Robustness(s) => s.validate(),
            SweepSpec::CrosstalkScaling(s) => s.validate(),
            SweepSpec::ShotRatio(s) => s.validate(),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            SweepSpec::RmseVsBudget(s) => s.seed,
            SweepSpec::Robustness(s) => s.seed,
            SweepSpec::CrosstalkScaling(s) => s.seed,
            SweepSpec::ShotRatio(s) => s.planner.seed,
        }
    }

    /// SHA-256 of the compact JSON encoding, hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("specs serialize");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn run(&self) -> Result<SweepResult> {
        match self {
            SweepSpec::RmseVsBudget(s) => rmse_vs_budget(s),
            SweepSpec::Robustness(s) => robustness_scan(s),
            SweepSpec::CrosstalkScaling(s) => crosstalk_scaling(s),
            SweepSpec::ShotRatio(s) => shot_ratio_curve(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub strategy: String,
    pub grid_param: String,
    pub grid_value: f64,
    pub param: String,
    /// Relative RMSE; the shot ratio itself for shot-ratio sweeps.
    pub rmse: f64,
    /// Relative Cramér–Rao prediction.
    pub crb: f64,
    pub trials: usize,
    pub failures: usize,
}

impl SweepRow {
    pub fn flagged(&self) -> bool {
        self.trials > 0 && self.failures as f64 > FAILURE_FLAG * self.trials as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub spec_hash: String,
    pub seed: u64,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub metadata: SweepMetadata,
}

/// JSON sidecar written next to a sweep CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub spec_hash: String,
    pub seed: u64,
    pub code_version: String,
    pub spec: SweepSpec,
}

impl SweepResult {
    fn new(spec: &SweepSpec, rows: Vec<SweepRow>) -> Self {
        for r in rows.iter().filter(|r| r.flagged()) {
            log::warn!(
                "{} at {}={}: {} of {} trials failed",
                r.strategy,
                r.grid_param,
                r.grid_value,
                r.failures,
                r.trials
            );
        }
        SweepResult {
            rows,
            metadata: SweepMetadata {
                spec_hash: spec.hash(),
                seed: spec.seed(),
                code_version: env!("CARGO_PKG_VERSION").to_string(),
            },
        }
    }

    pub fn find(&self, strategy: &str, grid_value: f64, param: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| {
            r.strategy == strategy
                && r.param == param
                && (r.grid_value - grid_value).abs() <= 1e-12 * grid_value.abs().max(1.0)
        })
    }

    /// `# spec_hash: <hex>` then the header and one line per row.
    pub fn to_csv_writer<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# spec_hash: {}", self.metadata.spec_hash)?;
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Parses the CSV written by [`SweepResult::to_csv_writer`], returning the
    /// embedded spec hash with the rows.
    pub fn rows_from_csv<R: Read>(mut r: R) -> Result<(String, Vec<SweepRow>)> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        let first = text.lines().next().unwrap_or_default();
        let hash = first
            .strip_prefix("# spec_hash:")
            .map(|h| h.trim().to_string())
            .ok_or_else(|| Error::Parse {
                location: "line 1".into(),
                message: "missing `# spec_hash:` header".into(),
            })?;
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for rec in rdr.deserialize::<SweepRow>() {
            rows.push(rec.map_err(|e| {
                Error::Parse {
                    location: e
                        .position()
                        .map(|p| format!("line {}", p.line()))
                        .unwrap_or_else(|| "unknown line".into()),
                    message: e.to_string(),
                }
            })?);
        }
        Ok((hash, rows))
    }

    pub fn sidecar(&self, spec: &SweepSpec) -> Sidecar {
        Sidecar {
            spec_hash: self.metadata.spec_hash.clone(),
            seed: self.metadata.seed,
            code_version: self.metadata.code_version.clone(),
            spec: spec.clone(),
        }
    }
}

/// Checks that a CSV's hash header matches its sidecar and that the sidecar's
/// spec still hashes to the recorded value.
pub fn verify_hash(csv_hash: &str, sidecar: &Sidecar) -> Result<()> {
    let recomputed = sidecar.spec.hash();
    if sidecar.spec_hash != recomputed {
        return Err(Error::Config(format!(
            "sidecar hash {} does not match its spec ({recomputed})",
            sidecar.spec_hash
        )));
    }
    if csv_hash != sidecar.spec_hash {
        return Err(Error::Config(format!(
            "CSV hash {csv_hash} does not match sidecar hash {}",
            sidecar.spec_hash
        )));
    }
    Ok(())
}

fn truth_model(omega: f64, gamma: f64) -> Result<RamseyModel<f64>> {
    let m = RamseyModel::two_param(omega, gamma);
    m.validate()?;
    if !(gamma > 0.0) {
        return Err(Error::Config("gamma must be positive".into()));
    }
    Ok(m)
}

fn guess_model(policy: &GuessPolicy, truth: &RamseyModel<f64>, key: &[u64]) -> Result<RamseyModel<f64>> {
    let (w, g) = (truth.get(Param::Omega)?, truth.gamma());
    let (fw, fg) = match *policy {
        GuessPolicy::Fixed { omega, gamma, .. } => (omega, gamma),
        _ => (0.0, 0.0),
    };
    let mut k0 = key.to_vec();
    k0.push(0);
    let mut k1 = key.to_vec();
    k1.push(1);
    Ok(RamseyModel::two_param(
        policy.guess(w, fw, &k0),
        policy.guess(g, fg, &k1).max(1e-3),
    ))
}

/// Relative CRB of ω and γ for `plan` at `truth`; NaN when not identifiable.
fn relative_crb(truth: &RamseyModel<f64>, plan: &MeasurementPlan<f64>) -> [f64; 2] {
    let free = [Param::Omega, Param::Gamma];
    let bound = fisher_matrix(truth, &free, plan, VarianceModel::Binomial).and_then(|fi| crb(&fi));
    match bound {
        Ok(b) => [
            b.per_param_variance_bound[0].sqrt() / truth.get(Param::Omega).unwrap_or(f64::NAN).abs(),
            b.per_param_variance_bound[1].sqrt() / truth.gamma().abs(),
        ],
        Err(_) => [f64::NAN; 2],
    }
}

struct TrialStats {
    sq: [f64; 2],
    used: usize,
    failures: usize,
}

fn run_trials(
    truth: &RamseyModel<f64>,
    guess: &RamseyModel<f64>,
    plan: &MeasurementPlan<f64>,
    trials: usize,
    key: &[u64],
) -> TrialStats {
    let outcomes: Vec<Option<[f64; 2]>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut path = key.to_vec();
            path.push(t as u64);
            let seed = derive_seed(&path);
            let data = sample_keyed(truth, plan, seed, 0, 0).ok()?;
            let fit = fit_least_squares(guess, &data, &[]).ok()?;
            if !fit.converged {
                return None;
            }
            Some([
                fit.get(Param::Omega)? - truth.get(Param::Omega).ok()?,
                fit.get(Param::Gamma)? - truth.gamma(),
            ])
        })
        .collect();
    let mut stats = TrialStats {
        sq: [0.0; 2],
        used: 0,
        failures: 0,
    };
    for o in outcomes {
        match o {
            Some([a, b]) => {
                stats.sq[0] += a * a;
                stats.sq[1] += b * b;
                stats.used += 1;
            }
            None => stats.failures += 1,
        }
    }
    stats
}

fn rows_for(
    strategy: &str,
    grid_param: &str,
    grid_value: f64,
    truth: &RamseyModel<f64>,
    crbs: [f64; 2],
    stats: &TrialStats,
    trials: usize,
) -> Vec<SweepRow> {
    let scale = [truth.get(Param::Omega).unwrap_or(f64::NAN).abs(), truth.gamma().abs()];
    ["omega", "gamma"]
        .iter()
        .enumerate()
        .map(|(k, name)| SweepRow {
            strategy: strategy.to_string(),
            grid_param: grid_param.to_string(),
            grid_value,
            param: (*name).to_string(),
            rmse: if stats.used > 0 {
                (stats.sq[k] / stats.used as f64).sqrt() / scale[k]
            } else {
                f64::NAN
            },
            crb: crbs[k],
            trials,
            failures: stats.failures,
        })
        .collect()
}

/// Relative RMSE of ω and γ per strategy and total budget, with CRB predictions.
pub fn rmse_vs_budget(spec: &BudgetSweep) -> Result<SweepResult> {
    spec.validate()?;
    let truth = truth_model(spec.omega, spec.gamma)?;
    let mut rows = Vec::new();
    for (si, strategy) in spec.strategies.iter().enumerate() {
        for (bi, &budget) in spec.budgets.iter().enumerate() {
            let key = [spec.seed, 0x5242, si as u64, bi as u64];
            let guess = guess_model(&spec.guess, &truth, &key)?;
            let plan = build_strategy(strategy, &guess, budget, spec.time_span)?;
            let stats = run_trials(&truth, &guess, &plan, spec.trials, &key);
            let crbs = relative_crb(&truth, &plan);
            rows.extend(rows_for(
                &strategy.label(),
                "n_tot",
                budget as f64,
                &truth,
                crbs,
                &stats,
                spec.trials,
            ));
        }
    }
    Ok(SweepResult::new(&SweepSpec::RmseVsBudget(spec.clone()), rows))
}

/// RMSE per strategy as the true γ moves away from the guess the plans were built for.
pub fn robustness_scan(spec: &RobustnessSweep) -> Result<SweepResult> {
    spec.validate()?;
    let guess = truth_model(spec.omega, spec.gamma_guess)?;
    let mut rows = Vec::new();
    for (si, strategy) in spec.strategies.iter().enumerate() {
        let plan = build_strategy(strategy, &guess, spec.budget, spec.time_span)?;
        for (fi, &factor) in spec.gamma_factors.iter().enumerate() {
            let truth = truth_model(spec.omega, factor * spec.gamma_guess)?;
            let key = [spec.seed, 0x524f, si as u64, fi as u64];
            let stats = run_trials(&truth, &guess, &plan, spec.trials, &key);
            let crbs = relative_crb(&truth, &plan);
            rows.extend(rows_for(
                &strategy.label(),
                "gamma_ratio",
                factor,
                &truth,
                crbs,
                &stats,
                spec.trials,
            ));
        }
    }
    Ok(SweepResult::new(&SweepSpec::Robustness(spec.clone()), rows))
}

/// Predicted variance of `Ĵ` on each edge of `chain` under `strategy` with
/// exact planning guesses: the ω̂ bound of the bare experiment plus the bound
/// of the shifted frequency with γ held fixed.
pub fn protocol_coupling_variance(
    chain: &ChainParams<f64>,
    strategy: &StrategyKind,
    budget_per_qubit: u64,
) -> Result<Vec<f64>> {
    let n = chain.n_qubits();
    let mut var = vec![f64::NAN; n - 1];
    let omega_var = |w: f64, g: f64, free: &[Param]| -> Result<f64> {
        let m = RamseyModel::two_param(w, g);
        let plan = build_strategy(strategy, &m, budget_per_qubit, None)?;
        let b = crb(&fisher_matrix(&m, free, &plan, VarianceModel::Binomial)?)?;
        Ok(b.bound(Param::Omega).expect("omega is free"))
    };
    for exp in build_chain_protocol(n)? {
        for t in exp.targets {
            if let Target::Coupling { qubit, neighbor } = t {
                let e = qubit.min(neighbor);
                let (w, g) = (chain.omegas[qubit], chain.gammas[qubit]);
                let bare = omega_var(w, g, &[Param::Omega, Param::Gamma])?;
                let shifted = omega_var(w + chain.couplings[e], g, &[Param::Omega])?;
                var[e] = bare + shifted;
            }
        }
    }
    Ok(var)
}

/// Relative J and ω RMSE of the chain protocol per chain length and strategy.
///
/// J errors are normalized by the ensemble mean `|J|` since individual
/// couplings are often near zero.
pub fn crosstalk_scaling(spec: &CrosstalkSweep) -> Result<SweepResult> {
    spec.validate()?;
    let mut rows = Vec::new();
    for &n in &spec.n_qubits {
        let chains: Vec<ChainParams<f64>> = (0..spec.trials)
            .map(|t| {
                ChainParams::random(
                    n,
                    spec.omega,
                    spec.gamma,
                    spec.coupling,
                    derive_seed(&[spec.seed, n as u64, t as u64]),
                )
            })
            .collect::<Result<_>>()?;
        let mean_abs_j = chains
            .iter()
            .flat_map(|c| c.couplings.iter())
            .map(|j| j.abs())
            .sum::<f64>()
            / (chains.len() * (n - 1)) as f64;
        let mean_abs_w = chains
            .iter()
            .flat_map(|c| c.omegas.iter())
            .map(|w| w.abs())
            .sum::<f64>()
            / (chains.len() * n) as f64;
        for (si, strategy) in spec.strategies.iter().enumerate() {
            let outcomes: Vec<Option<(f64, f64, usize, usize)>> = chains
                .par_iter()
                .enumerate()
                .map(|(t, chain)| {
                    let opts = ProtocolOptions {
                        budget_per_qubit: spec.budget_per_qubit,
                        guess: spec.guess,
                        mode: SampleMode::Shots,
                        seed: derive_seed(&[spec.seed, 0x4354, n as u64, si as u64, t as u64]),
                    };
                    let est = run_protocol(chain, strategy, &opts).ok()?;
                    if !est.unconverged.is_empty() {
                        return None;
                    }
                    let sj = est
                        .couplings
                        .iter()
                        .zip(&chain.couplings)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum();
                    let sw = est.omegas.iter().zip(&chain.omegas).map(|(a, b)| (a - b).powi(2)).sum();
                    Some((sj, sw, n - 1, n))
                })
                .collect();
            let crb_j: Vec<f64> = chains
                .iter()
                .take(20)
                .map(|c| protocol_coupling_variance(c, strategy, spec.budget_per_qubit))
                .collect::<Result<Vec<_>>>()?
                .concat();
            let crb_j = (crb_j.iter().sum::<f64>() / crb_j.len() as f64).sqrt() / mean_abs_j;
            let (mut sj, mut sw, mut cj, mut cw, mut failures) = (0.0, 0.0, 0usize, 0usize, 0usize);
            for o in outcomes {
                match o {
                    Some((a, b, ka, kb)) => {
                        sj += a;
                        sw += b;
                        cj += ka;
                        cw += kb;
                    }
                    None => failures += 1,
                }
            }
            let label = strategy.label();
            let row = |param: &str, rmse: f64, crb: f64| SweepRow {
                strategy: label.clone(),
                grid_param: "n_qubits".into(),
                grid_value: n as f64,
                param: param.into(),
                rmse,
                crb,
                trials: spec.trials,
                failures,
            };
            rows.push(row("J", (sj / cj.max(1) as f64).sqrt() / mean_abs_j, crb_j));
            rows.push(row("omega", (sw / cw.max(1) as f64).sqrt() / mean_abs_w, f64::NAN));
        }
    }
    Ok(SweepResult::new(&SweepSpec::CrosstalkScaling(spec.clone()), rows))
}

/// Continuous shot ratio `s₁/s₂` of the two-time X-only design across `γ/ω`.
pub fn shot_ratio_curve(spec: &ShotRatioSweep) -> Result<SweepResult> {
    spec.validate()?;
    let model = RamseyModel::two_param(spec.omega, spec.omega.abs());
    let rows = spec
        .gamma_over_omega
        .par_iter()
        .map(|&r| {
            let (ratio, failures) = match shot_ratio(&model, r, &spec.planner) {
                Ok(v) => (v, 0),
                Err(e) => {
                    log::warn!("shot ratio at gamma/omega = {r} failed: {e}");
                    (f64::NAN, 1)
                }
            };
            SweepRow {
                strategy: "two-time-optimal-x".into(),
                grid_param: "gamma_over_omega".into(),
                grid_value: r,
                param: "shot_ratio".into(),
                rmse: ratio,
                crb: f64::NAN,
                trials: 1,
                failures,
            }
        })
        .collect();
    Ok(SweepResult::new(&SweepSpec::ShotRatio(spec.clone()), rows))
}
