use std::path::PathBuf;

use crate::prob::ProbVector;
use crate::trainer::EpochMetrics;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A hyper-parameter is outside the domain where the quantity is defined.
    #[error("parameter `{name}` out of domain: {detail}")]
    ParameterDomain { name: &'static str, detail: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// The posterior has more than one maximizing class.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("simplex minimization did not converge after {iterations} iterations (residual {residual:.3e})")]
    ConvergenceFailure {
        best: ProbVector,
        residual: f64,
        iterations: usize,
    },

    #[error("training diverged at epoch {epoch}")]
    TrainingFailure { epoch: usize, metrics: Vec<EpochMetrics> },

    #[error("i/o error at {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(name: &'static str, detail: impl Into<String>) -> Self {
        Error::ParameterDomain {
            name,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by a malformed configuration or parameter
    /// rather than by a failed computation.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::ParameterDomain { .. }
                | Error::InvalidInput(_)
                | Error::Configuration(_)
                | Error::DimensionMismatch { .. }
                | Error::DegenerateInput(_)
                | Error::Json(_)
        )
    }
}
