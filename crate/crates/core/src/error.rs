use thiserror::Error;

use crate::signal::Param;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parameter `{param}` is not part of the {model} model")]
    UnknownParam { param: Param, model: &'static str },

    #[error("per-shot variance vanishes at t={time} while the gradient does not")]
    SingularVariance { time: f64 },

    #[error("Fisher matrix is not invertible (condition number {condition:e}); null direction over {labels:?}: {direction:?}")]
    NonIdentifiable {
        labels: Vec<Param>,
        direction: Vec<f64>,
        condition: f64,
    },

    #[error("planner error: {0}")]
    Planner(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("unphysical model: expectation {value} outside [-1, 1] at t={time}")]
    UnphysicalModel { value: f64, time: f64 },

    #[error("indeterminate: {0}")]
    Indeterminate(String),

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("under-determined fit: {free} free parameters but only {data} data points")]
    UnderDetermined { free: usize, data: usize },

    #[error("estimator failed on qubit {qubit}: {source}")]
    Qubit {
        qubit: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
