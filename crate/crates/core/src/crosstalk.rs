//! ZZ-crosstalk chains: spectator-conditioned effective frequencies, the
//! four-experiment calibration protocol, and the global-superposition signal
//! used as a negative control.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::fit_least_squares;
use crate::fisher::MeasurementPlan;
use crate::planner::{build_strategy, StrategyKind};
use crate::sampler::{noiseless, sample_keyed, SampleSet};
use crate::scalar::{lit, Real};
use crate::signal::{Param, RamseyModel};
use crate::simplex::NelderMead;
use crate::stream::rng_for;

/// Open chain: `couplings[i]` couples qubits `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainParams<T> {
    pub omegas: Vec<T>,
    pub gammas: Vec<T>,
    pub couplings: Vec<T>,
}

impl<T: Real> ChainParams<T> {
    pub fn new(omegas: Vec<T>, gammas: Vec<T>, couplings: Vec<T>) -> Result<Self> {
        let c = ChainParams {
            omegas,
            gammas,
            couplings,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn n_qubits(&self) -> usize {
        self.omegas.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.omegas.len();
        if n < 2 {
            return Err(Error::domain("a chain needs at least two qubits"));
        }
        if self.gammas.len() != n || self.couplings.len() != n - 1 {
            return Err(Error::domain(format!(
                "chain of {n} qubits needs {n} rates and {} couplings, got {} and {}",
                n - 1,
                self.gammas.len(),
                self.couplings.len()
            )));
        }
        let all = self.omegas.iter().chain(&self.gammas).chain(&self.couplings);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("chain parameters must be finite"));
        }
        if self.gammas.iter().any(|&g| g < T::zero()) {
            return Err(Error::domain("dephasing rates must be non-negative"));
        }
        Ok(())
    }

    /// Coupling on the edge `{a, b}`, if the two qubits are adjacent.
    pub fn coupling(&self, a: usize, b: usize) -> Option<T> {
        let (lo, hi) = (a.min(b), a.max(b));
        (hi == lo + 1 && hi < self.n_qubits()).then(|| self.couplings[lo])
    }

    /// Draws ω, γ ~ N(μ, σ) and J ~ N(μ_J, σ_J); γ is floored at `1e-3`.
    pub fn random(n: usize, omega: (f64, f64), gamma: (f64, f64), coupling: (f64, f64), seed: u64) -> Result<Self> {
        let mut rng = rng_for(&[seed, 0x4348_4149_4e]);
        let mut draw = |(mu, sigma): (f64, f64)| -> f64 { mu + sigma * rng.sample::<f64, _>(StandardNormal) };
        let omegas = (0..n).map(|_| lit(draw(omega))).collect();
        let gammas = (0..n).map(|_| lit(draw(gamma).max(1e-3))).collect();
        let couplings = (0..n.saturating_sub(1)).map(|_| lit(draw(coupling))).collect();
        ChainParams::new(omegas, gammas, couplings)
    }
}

/// Neighbor lists of the open chain on `n` qubits.
pub fn chain_adjacency(n: usize) -> Vec<Vec<usize>> {
    (0..n)
        .map(|i| {
            let mut v = Vec::with_capacity(2);
            if i > 0 {
                v.push(i - 1);
            }
            if i + 1 < n {
                v.push(i + 1);
            }
            v
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QubitRole {
    #[serde(rename = "R")]
    Ramsey,
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
}

impl fmt::Display for QubitRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QubitRole::Ramsey => "R",
            QubitRole::Zero => "0",
            QubitRole::One => "1",
        })
    }
}

/// What a Ramsey qubit's fitted frequency measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Target {
    /// The bare frequency `ω_qubit`.
    Omega { qubit: usize },
    /// `ω_qubit + J` on the edge to `neighbor`, which is held in `|1⟩`.
    Coupling { qubit: usize, neighbor: usize },
}

impl Target {
    pub fn qubit(&self) -> usize {
        match *self {
            Target::Omega { qubit } | Target::Coupling { qubit, .. } => qubit,
        }
    }
}

/// Role per qubit plus the target of every Ramsey qubit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub roles: Vec<QubitRole>,
    pub targets: Vec<Target>,
}

/// Targets implied by a role assignment: a Ramsey qubit with no `|1⟩`
/// neighbor measures its bare frequency, one with exactly one measures that
/// edge. Qubits with more `|1⟩` neighbors are skipped; see [`ExperimentConfig::violations`].
pub fn derive_targets(roles: &[QubitRole], adjacency: &[Vec<usize>]) -> Vec<Target> {
    let mut out = Vec::new();
    for (v, role) in roles.iter().enumerate() {
        if *role != QubitRole::Ramsey {
            continue;
        }
        let ones: Vec<usize> = adjacency[v]
            .iter()
            .copied()
            .filter(|&u| roles[u] == QubitRole::One)
            .collect();
        match ones.as_slice() {
            [] => out.push(Target::Omega { qubit: v }),
            [u] => out.push(Target::Coupling { qubit: v, neighbor: *u }),
            _ => {}
        }
    }
    out
}

impl ExperimentConfig {
    pub fn from_roles(roles: Vec<QubitRole>, adjacency: &[Vec<usize>]) -> Self {
        let targets = derive_targets(&roles, adjacency);
        ExperimentConfig { roles, targets }
    }

    pub fn ramsey_qubits(&self) -> impl Iterator<Item = usize> + '_ {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == QubitRole::Ramsey)
            .map(|(i, _)| i)
    }

    /// Rule violations of this configuration on a graph given by neighbor lists.
    pub fn violations(&self, adjacency: &[Vec<usize>]) -> Vec<String> {
        let n = adjacency.len();
        let mut out = Vec::new();
        if self.roles.len() != n {
            out.push(format!("{} roles for {n} qubits", self.roles.len()));
            return out;
        }
        for (v, nbrs) in adjacency.iter().enumerate() {
            if self.roles[v] != QubitRole::Ramsey {
                continue;
            }
            for &u in nbrs {
                if u > v && self.roles[u] == QubitRole::Ramsey {
                    out.push(format!("adjacent Ramsey qubits {v} and {u}"));
                }
            }
            let ones = nbrs.iter().filter(|&&u| self.roles[u] == QubitRole::One).count();
            if ones > 1 {
                out.push(format!("Ramsey qubit {v} has {ones} neighbors in |1>"));
            }
        }
        let expected = derive_targets(&self.roles, adjacency);
        let mut have = self.targets.clone();
        have.sort();
        let mut want = expected;
        want.sort();
        if have != want {
            out.push(format!("targets {have:?} do not match roles (expected {want:?})"));
        }
        out
    }

    pub fn validate_chain(&self, n: usize) -> Result<()> {
        match self.violations(&chain_adjacency(n)).into_iter().next() {
            Some(v) => Err(Error::ProtocolViolation(v)),
            None => Ok(()),
        }
    }
}

fn check_roles(roles: &[QubitRole], n: usize) -> Result<()> {
    if roles.len() != n {
        return Err(Error::ProtocolViolation(format!(
            "{} roles for {n} qubits",
            roles.len()
        )));
    }
    for i in 0..n.saturating_sub(1) {
        if roles[i] == QubitRole::Ramsey && roles[i + 1] == QubitRole::Ramsey {
            return Err(Error::ProtocolViolation(format!(
                "adjacent Ramsey qubits {i} and {}",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Frequency at which Ramsey qubit `i` precesses given its neighbors' states.
pub fn effective_frequency<T: Real>(chain: &ChainParams<T>, roles: &[QubitRole], i: usize) -> Result<T> {
    chain.validate()?;
    let n = chain.n_qubits();
    check_roles(roles, n)?;
    if i >= n || roles[i] != QubitRole::Ramsey {
        return Err(Error::ProtocolViolation(format!("qubit {i} is not in the Ramsey role")));
    }
    let mut shift = T::zero();
    let mut ones = 0;
    for u in chain_adjacency(n)[i].iter().copied() {
        if roles[u] == QubitRole::One {
            ones += 1;
            shift = shift + chain.coupling(i, u).expect("adjacent");
        }
    }
    if ones > 1 {
        return Err(Error::ProtocolViolation(format!(
            "Ramsey qubit {i} has {ones} neighbors in |1>"
        )));
    }
    Ok(chain.omegas[i] + shift)
}

/// The four chain experiments: two bare-frequency experiments over the even
/// and odd halves, then two coupling experiments with even qubits in Ramsey
/// and odd spectators alternating `|1⟩`/`|0⟩`, phase-shifted between the two.
///
/// Ramsey candidates without exactly one `|1⟩` neighbor in the coupling
/// experiments are parked in `|0⟩`, so every ω and every J is targeted once.
pub fn build_chain_protocol(n: usize) -> Result<Vec<ExperimentConfig>> {
    if n < 2 {
        return Err(Error::domain("a chain needs at least two qubits"));
    }
    let adj = chain_adjacency(n);
    let parity = |p: usize| -> Vec<QubitRole> {
        (0..n)
            .map(|i| if i % 2 == p { QubitRole::Ramsey } else { QubitRole::Zero })
            .collect()
    };
    let coupling = |start_one: bool| -> Vec<QubitRole> {
        let mut roles: Vec<QubitRole> = (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    QubitRole::Ramsey
                } else if ((i / 2) % 2 == 0) == start_one {
                    QubitRole::One
                } else {
                    QubitRole::Zero
                }
            })
            .collect();
        for v in (0..n).step_by(2) {
            let ones = adj[v].iter().filter(|&&u| roles[u] == QubitRole::One).count();
            if ones != 1 {
                roles[v] = QubitRole::Zero;
            }
        }
        roles
    };
    Ok(vec![
        ExperimentConfig::from_roles(parity(0), &adj),
        ExperimentConfig::from_roles(parity(1), &adj),
        ExperimentConfig::from_roles(coupling(true), &adj),
        ExperimentConfig::from_roles(coupling(false), &adj),
    ])
}

/// Where planning guesses come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "policy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GuessPolicy {
    /// The true values.
    #[default]
    Exact,
    /// True values times `1 + σ·z`, `z ~ N(0, 1)` per parameter.
    Perturbed { relative_sigma: f64 },
    /// The same values for every qubit and edge.
    Fixed { omega: f64, gamma: f64, coupling: f64 },
}

impl GuessPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GuessPolicy::Perturbed { relative_sigma } if !(relative_sigma >= 0.0 && relative_sigma.is_finite()) => {
                Err(Error::Config("relative_sigma must be finite and non-negative".into()))
            }
            GuessPolicy::Fixed { omega, gamma, coupling }
                if !(omega.is_finite() && gamma > 0.0 && gamma.is_finite() && coupling.is_finite()) =>
            {
                Err(Error::Config("fixed guesses must be finite with gamma > 0".into()))
            }
            _ => Ok(()),
        }
    }

    /// Guess of a true value, drawing perturbations from `key`.
    pub fn guess<T: Real>(&self, truth: T, fixed: f64, key: &[u64]) -> T {
        match *self {
            GuessPolicy::Exact => truth,
            GuessPolicy::Perturbed { relative_sigma } => {
                let z: f64 = rng_for(key).sample(StandardNormal);
                truth * lit::<T>(1.0 + relative_sigma * z)
            }
            GuessPolicy::Fixed { .. } => lit(fixed),
        }
    }

    fn fixed_values(&self) -> (f64, f64, f64) {
        match *self {
            GuessPolicy::Fixed { omega, gamma, coupling } => (omega, gamma, coupling),
            _ => (0.0, 0.0, 0.0),
        }
    }
}

/// How a protocol run turns plans into data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    #[default]
    Shots,
    /// Exact expectations, no shot noise.
    Noiseless,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolEstimate<T> {
    pub omegas: Vec<T>,
    pub gammas: Vec<T>,
    pub couplings: Vec<T>,
    /// Qubits whose fit hit the iteration cap in any experiment.
    pub unconverged: Vec<usize>,
    /// Shots spent across all experiments.
    pub total_shots: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolOptions {
    pub budget_per_qubit: u64,
    pub guess: GuessPolicy,
    pub mode: SampleMode,
    pub seed: u64,
}

fn data_for<T: Real>(
    model: &RamseyModel<T>,
    plan: &MeasurementPlan<T>,
    opts: &ProtocolOptions,
    experiment: u64,
    qubit: usize,
) -> Result<SampleSet<T>> {
    match opts.mode {
        SampleMode::Shots => sample_keyed(model, plan, opts.seed, experiment, qubit as u64),
        SampleMode::Noiseless => noiseless(model, plan),
    }
}

/// Picks the branch of an X-only frequency estimate matching the guess's sign.
fn orient<T: Real>(estimate: T, guess: T, x_only: bool) -> T {
    if x_only && guess < T::zero() {
        -estimate.abs()
    } else {
        estimate
    }
}

/// Runs the four-experiment protocol on `chain` with `strategy` for every
/// Ramsey qubit. ω̂ and γ̂ come from experiments 1–2; experiments 3–4 fit only
/// the shifted frequency with γ frozen at γ̂, and `Ĵ = ω̂_shifted − ω̂`.
pub fn run_protocol<T: Real>(
    chain: &ChainParams<T>,
    strategy: &StrategyKind<T>,
    opts: &ProtocolOptions,
) -> Result<ProtocolEstimate<T>> {
    chain.validate()?;
    opts.guess.validate()?;
    let n = chain.n_qubits();
    let experiments = build_chain_protocol(n)?;
    let (fw, fg, fj) = opts.guess.fixed_values();
    let x_only = strategy.x_only();
    let omega_guess = |i: usize| opts.guess.guess(chain.omegas[i], fw, &[opts.seed, 0x4755, 0, i as u64]);
    let gamma_guess = |i: usize| {
        opts.guess
            .guess(chain.gammas[i], fg, &[opts.seed, 0x4755, 1, i as u64])
            .max(lit(1e-3))
    };
    let coupling_guess = |e: usize| {
        opts.guess
            .guess(chain.couplings[e], fj, &[opts.seed, 0x4755, 2, e as u64])
    };

    let mut omegas = vec![T::nan(); n];
    let mut gammas = vec![T::nan(); n];
    let mut couplings = vec![T::nan(); n - 1];
    let mut unconverged = Vec::new();
    let mut total_shots = 0u64;

    for range in [0..2usize, 2..4] {
        let jobs: Vec<(usize, Target)> = range
            .flat_map(|e| experiments[e].targets.iter().map(move |&t| (e, t)))
            .collect();
        let results: Vec<Result<(Target, T, T, bool, u64)>> = jobs
            .par_iter()
            .map(|&(e, target)| {
                let i = target.qubit();
                let truth_freq = effective_frequency(chain, &experiments[e].roles, i)?;
                let truth = RamseyModel::two_param(truth_freq, chain.gammas[i]);
                let attach = |source: Error| Error::Qubit {
                    qubit: i,
                    source: Box::new(source),
                };
                let (guess, frozen): (RamseyModel<T>, &[Param]) = match target {
                    Target::Omega { .. } => (RamseyModel::two_param(omega_guess(i), gamma_guess(i)), &[]),
                    Target::Coupling { neighbor, .. } => {
                        let edge = i.min(neighbor);
                        let plan_guess = RamseyModel::two_param(omega_guess(i) + coupling_guess(edge), gamma_guess(i));
                        (plan_guess, &[Param::Gamma])
                    }
                };
                let plan = build_strategy(strategy, &guess, opts.budget_per_qubit, None).map_err(attach)?;
                let data = data_for(&truth, &plan, opts, e as u64, i).map_err(attach)?;
                let init = match target {
                    Target::Omega { .. } => guess,
                    Target::Coupling { .. } => guess.with(Param::Gamma, gammas[i]).map_err(attach)?,
                };
                let fit = fit_least_squares(&init, &data, frozen).map_err(attach)?;
                let w = orient(fit.get(Param::Omega).expect("omega"), guess.get(Param::Omega)?, x_only);
                let g = fit.get(Param::Gamma).expect("gamma");
                Ok((target, w, g, fit.converged, plan.total_shots()))
            })
            .collect();
        for r in results {
            let (target, w, g, converged, shots) = r?;
            total_shots += shots;
            if !converged && !unconverged.contains(&target.qubit()) {
                unconverged.push(target.qubit());
            }
            match target {
                Target::Omega { qubit } => {
                    omegas[qubit] = w;
                    gammas[qubit] = g;
                }
                Target::Coupling { qubit, neighbor } => {
                    couplings[qubit.min(neighbor)] = w - omegas[qubit];
                }
            }
        }
    }
    unconverged.sort_unstable();
    Ok(ProtocolEstimate {
        omegas,
        gammas,
        couplings,
        unconverged,
        total_shots,
    })
}

/// Middle-qubit `⟨IXI⟩` of a three-qubit chain prepared in a global
/// superposition: `¼[cos ω₂t + cos(J₁+ω₂)t + cos(J₂+ω₂)t + cos(J₁+J₂+ω₂)t]·e^{−γ₂t}`.
pub fn sm5_global_x<T: Real>(chain: &ChainParams<T>, t: T) -> Result<T> {
    chain.validate()?;
    if chain.n_qubits() != 3 {
        return Err(Error::domain(
            "the global-superposition signal is defined for three qubits",
        ));
    }
    if !(t >= T::zero()) {
        return Err(Error::domain("time must be non-negative"));
    }
    Ok(global_x(
        chain.omegas[1],
        chain.gammas[1],
        chain.couplings[0],
        chain.couplings[1],
        t,
    ))
}

fn global_x<T: Real>(w: T, g: T, j1: T, j2: T, t: T) -> T {
    let s = (w * t).cos() + ((j1 + w) * t).cos() + ((j2 + w) * t).cos() + ((j1 + j2 + w) * t).cos();
    s * lit::<T>(0.25) * (-g * t).exp()
}

/// Result of fitting `(ω₂, γ₂, J₁, J₂)` to the global-superposition signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalFit<T> {
    pub omega: T,
    pub gamma: T,
    pub couplings: [T; 2],
    pub converged: bool,
}

/// Naive calibration: sample the middle qubit's X signal after a global
/// superposition at `n_times` equally spaced times and fit all four
/// parameters at once, starting from `init = (ω₂, γ₂, J₁, J₂)`.
pub fn sm5_naive_fit<T: Real>(
    chain: &ChainParams<T>,
    total_shots: u64,
    n_times: usize,
    init: [T; 4],
    seed: u64,
) -> Result<GlobalFit<T>> {
    sm5_global_x(chain, T::zero())?;
    if n_times < 4 || (n_times as u64) > total_shots {
        return Err(Error::Infeasible(format!("{n_times} times with {total_shots} shots")));
    }
    let g = chain.gammas[1].max(lit(1e-3));
    let t_max = lit::<T>(3.0) / g;
    let t_min = t_max / lit(20.0);
    let shots = crate::planner::allocate_shots(&vec![T::one(); n_times], total_shots);
    let mut samples = Vec::with_capacity(n_times);
    for (k, &s) in shots.iter().enumerate() {
        let t = t_min + (t_max - t_min) * lit::<T>(k as f64 / (n_times - 1) as f64);
        let mu = crate::scalar::to_f64(sm5_global_x(chain, t)?);
        let p = ((1.0 + mu) / 2.0).clamp(0.0, 1.0);
        let mut rng = rng_for(&[seed, 0x534d35, k as u64]);
        let count = rand_distr::Distribution::sample(
            &rand_distr::Binomial::new(s, p).map_err(|e| Error::domain(e.to_string()))?,
            &mut rng,
        );
        samples.push((t, lit::<T>((2.0 * count as f64 - s as f64) / s as f64)));
    }
    let cost = |x: &[T]| -> T {
        let gamma = x[1].max(T::zero());
        samples
            .iter()
            .map(|&(t, m)| {
                let r = m - global_x(x[0], gamma, x[2], x[3], t);
                r * r
            })
            .sum()
    };
    let nm = NelderMead {
        max_evals: 20_000,
        ftol: 1e-15,
        xtol: 1e-10,
        adaptive: true,
    };
    let r = nm.minimize(cost, &init, lit(0.1));
    Ok(GlobalFit {
        omega: r.x[0],
        gamma: r.x[1].max(T::zero()),
        couplings: [r.x[2], r.x[3]],
        converged: r.converged,
    })
}
