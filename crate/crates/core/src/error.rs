use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numeric fault at t = {time:.6} s: {reason}")]
    NumericFault { time: f64, reason: String },

    #[error("network produced a non-finite output")]
    NonFiniteOutput,

    #[error("training diverged at epoch {epoch}: loss {loss:e} exceeds {limit:e}")]
    TrainingDiverged { epoch: usize, loss: f64, limit: f64 },

    #[error("scenario configs do not share {0}")]
    MismatchedConfigs(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn numeric(time: f64, reason: impl Into<String>) -> Self {
        Error::NumericFault {
            time,
            reason: reason.into(),
        }
    }

    /// Process exit code used by the `vsg-lab` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParams(_) | Error::Config(_) | Error::MismatchedConfigs(_) => 1,
            Error::Json { source, .. } if !source.is_io() => 1,
            Error::NumericFault { .. } | Error::NonFiniteOutput | Error::TrainingDiverged { .. } => 2,
            Error::Io { .. } | Error::Json { .. } | Error::Csv { .. } => 3,
        }
    }
}
