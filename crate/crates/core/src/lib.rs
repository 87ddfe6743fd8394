//! Optimal measurement schedules for Ramsey calibration.
//!
//! The numerical core ([`signal`], [`fisher`], [`planner`], [`sampler`],
//! [`estimator`], [`crosstalk`]) is generic over the scalar type through
//! [`Real`]; the aliases below fix it to `f64`, which is what the harness,
//! the tiler and the command-line tool use.

pub mod crosstalk;
pub mod error;
pub mod estimator;
pub mod fisher;
pub mod harness;
pub mod linalg;
pub mod planner;
pub mod sampler;
pub mod scalar;
pub mod signal;
pub mod simplex;
pub mod stream;
pub mod topology;

pub use crosstalk::{
    build_chain_protocol, effective_frequency, run_protocol, sm5_global_x, sm5_naive_fit, ExperimentConfig,
    GuessPolicy, ProtocolOptions, QubitRole, SampleMode, Target,
};
pub use error::{Error, Result};
pub use estimator::{fit_least_squares, invert_xy};
pub use fisher::{crb, fisher_matrix, xy_single_time_crb, PlanEntry, VarianceModel};
pub use planner::{
    build_strategy, optimal_xy_time, optimize_plan, shot_ratio, PlannerConfig, ShotAllocation, StrategyKind,
};
pub use sampler::{sample, sample_multi};
pub use scalar::Real;
pub use signal::{expectation, expectation_gradient, ModelFamily, Param, Quadrature};
pub use topology::{load_graph, tile, validate_plan, CouplingGraph, TilingEffort, TilingPlan};

pub type Model = signal::RamseyModel<f64>;
pub type QubitParams = signal::QubitParams<f64>;
pub type Plan = fisher::MeasurementPlan<f64>;
pub type Fisher = fisher::FisherMatrix<f64>;
pub type Crb = fisher::CrbResult<f64>;
pub type Samples = sampler::SampleSet<f64>;
pub type Estimate = estimator::EstimateResult<f64>;
pub type Chain = crosstalk::ChainParams<f64>;
pub type ProtocolEstimate = crosstalk::ProtocolEstimate<f64>;
