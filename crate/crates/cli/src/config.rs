//! Run configuration: a JSON file with one flat block per command, merged
//! with command-line flags (flags win).

use std::path::{Path, PathBuf};

use optcal::fisher::VarianceModel;
use optcal::planner::ShotAllocation;
use optcal::signal::{ModelFamily, Param, Quadrature, RamseyModel};
use optcal::topology::TilingEffort;
use optcal::Model;
use serde::Deserialize;
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub plan: Option<PlanBlock>,
    pub simulate: Option<SimulateBlock>,
    pub fit: Option<FitBlock>,
    /// Parsed against the sweep kind named on the command line.
    pub sweep: Option<Value>,
    pub tile: Option<TileBlock>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::usage(format!(
                "config {} line {} column {}: {e}",
                path.display(),
                e.line(),
                e.column()
            ))
        })
    }
}

/// Model family and parameter values, shared by `plan`, `simulate` and `fit`.
#[derive(Debug, Default, Clone)]
pub struct ModelBlock {
    pub model: Option<ModelFamily>,
    pub omega: Option<f64>,
    pub gamma: Option<f64>,
    pub amplitude: Option<f64>,
    pub offset: Option<f64>,
    pub phase: Option<f64>,
}

impl ModelBlock {
    pub fn merge(self, flags: ModelBlock) -> ModelBlock {
        ModelBlock {
            model: flags.model.or(self.model),
            omega: flags.omega.or(self.omega),
            gamma: flags.gamma.or(self.gamma),
            amplitude: flags.amplitude.or(self.amplitude),
            offset: flags.offset.or(self.offset),
            phase: flags.phase.or(self.phase),
        }
    }

    /// Builds the model; `omega` and `gamma` are required where the family has them.
    pub fn build(&self) -> Result<Model, CliError> {
        let family = self.model.unwrap_or(ModelFamily::TwoParam);
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| CliError::usage(format!("--{name} is required for the {family} model")))
        };
        let gamma = need(self.gamma, "gamma")?;
        let model = match family {
            ModelFamily::TwoParam => RamseyModel::two_param(need(self.omega, "omega")?, gamma),
            ModelFamily::FiveParam => RamseyModel::five_param(
                self.amplitude.unwrap_or(1.0),
                self.offset.unwrap_or(0.0),
                self.phase.unwrap_or(0.0),
                need(self.omega, "omega")?,
                gamma,
            ),
            ModelFamily::PureDecay => {
                if self.omega.is_some() {
                    return Err(CliError::usage("the pure-decay model has no omega"));
                }
                RamseyModel::pure_decay(self.amplitude.unwrap_or(1.0), gamma)
            }
        };
        model.validate().map_err(CliError::config)?;
        Ok(model)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanBlock {
    pub model: Option<ModelFamily>,
    pub omega: Option<f64>,
    pub gamma: Option<f64>,
    pub amplitude: Option<f64>,
    pub offset: Option<f64>,
    pub phase: Option<f64>,
    pub free: Option<Vec<Param>>,
    pub quadratures: Option<Vec<Quadrature>>,
    pub shots: Option<u64>,
    pub max_times: Option<usize>,
    pub merge_tolerance: Option<f64>,
    pub restarts: Option<usize>,
    pub variance: Option<VarianceModel>,
    pub shot_allocation: Option<ShotAllocation>,
    pub time_bounds: Option<(f64, f64)>,
}

pub const PLAN_KEYS: &str = "Config block `plan` keys: model, omega, gamma, amplitude, offset, phase, free, \
quadratures, shots, max_times, merge_tolerance, restarts, variance, shot_allocation, time_bounds";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    pub model: Option<ModelFamily>,
    pub omega: Option<f64>,
    pub gamma: Option<f64>,
    pub amplitude: Option<f64>,
    pub offset: Option<f64>,
    pub phase: Option<f64>,
    pub plan: Option<PathBuf>,
    pub chain: Option<PathBuf>,
    pub strategy: Option<String>,
    pub n_times: Option<usize>,
    pub budget_per_qubit: Option<u64>,
    pub format: Option<String>,
}

pub const SIMULATE_KEYS: &str = "Config block `simulate` keys: model, omega, gamma, amplitude, offset, phase, \
plan, chain, strategy, n_times, budget_per_qubit, format";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitBlock {
    pub model: Option<ModelFamily>,
    pub omega: Option<f64>,
    pub gamma: Option<f64>,
    pub amplitude: Option<f64>,
    pub offset: Option<f64>,
    pub phase: Option<f64>,
    pub samples: Option<Vec<PathBuf>>,
    pub frozen: Option<Vec<Param>>,
}

pub const FIT_KEYS: &str =
    "Config block `fit` keys: model, omega, gamma, amplitude, offset, phase (initial values), samples, frozen";

macro_rules! model_of {
    ($($t:ty),*) => {$(
        impl $t {
            pub fn model_block(&self) -> ModelBlock {
                ModelBlock {
                    model: self.model,
                    omega: self.omega,
                    gamma: self.gamma,
                    amplitude: self.amplitude,
                    offset: self.offset,
                    phase: self.phase,
                }
            }
        }
    )*};
}

model_of!(PlanBlock, SimulateBlock, FitBlock);

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TileBlock {
    pub graph: Option<PathBuf>,
    pub generator: Option<String>,
    pub n: Option<usize>,
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub distance: Option<usize>,
    pub p: Option<f64>,
    pub effort: Option<String>,
    pub node_limit: Option<u64>,
}

pub const TILE_KEYS: &str =
    "Config block `tile` keys: graph, generator (path|grid|heavy-hex|random), n, width, height, distance, p, \
effort (greedy|exhaustive), node_limit";

pub const SWEEP_KEYS: &str = "Config block `sweep` keys by kind:
  rmse-vs-budget: strategies, budgets, trials, omega, gamma, guess, time_span, seed
  robustness: strategies, omega, gamma_guess, gamma_factors, budget, trials, time_span, seed
  crosstalk-scaling: strategies, n_qubits, omega, gamma, coupling ([mean, std] each), budget_per_qubit, trials, \
guess, seed
  shot-ratio: gamma_over_omega, omega, planner (max_times, total_shots, merge_tolerance, quadratures, objective, \
optimizer_restarts, time_bounds, variance, shots, seed)";

/// Parses the sweep block (if any) as the given spec type.
pub fn sweep_block<S: for<'de> Deserialize<'de> + Default>(block: Option<Value>) -> Result<S, CliError> {
    match block {
        None => Ok(S::default()),
        Some(v) => serde_json::from_value(v).map_err(|e| CliError::usage(format!("sweep block: {e}"))),
    }
}

pub fn effort(name: Option<&str>, limit: Option<u64>) -> Result<TilingEffort, CliError> {
    match name.unwrap_or("greedy") {
        "greedy" => Ok(TilingEffort::Greedy),
        "exhaustive" => Ok(TilingEffort::Exhaustive {
            limit: limit.unwrap_or(optcal::topology::DEFAULT_NODE_LIMIT),
        }),
        other => Err(CliError::usage(format!("unknown effort `{other}`"))),
    }
}
