use std::fmt;

use optcal::Error;

/// Exit status for usage and configuration problems.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for numerical and runtime failures.
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            error: anyhow::anyhow!(msg.into()),
        }
    }

    pub fn config(e: Error) -> Self {
        CliError {
            code: EXIT_USAGE,
            error: e.into(),
        }
    }

    pub fn runtime(e: impl Into<anyhow::Error>) -> Self {
        CliError {
            code: EXIT_RUNTIME,
            error: e.into(),
        }
    }

    pub fn context(self, what: impl fmt::Display) -> Self {
        CliError {
            code: self.code,
            error: self.error.context(what.to_string()),
        }
    }
}

/// Input and configuration errors are usage errors; the rest are runtime errors.
impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse { .. } | Error::Json(_) | Error::Csv(_) | Error::UnphysicalModel { .. } => {
                CliError::config(e)
            }
            other => CliError::runtime(other),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}
