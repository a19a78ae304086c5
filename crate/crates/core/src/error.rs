use std::path::PathBuf;

/// Errors produced by the numerical routines and the experiment runner.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value at {0}")]
    NonFinite(String),

    #[error("start vector is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },

    #[error("Lanczos breakdown after {dimension} steps (b = {residual:e})")]
    Breakdown { dimension: usize, residual: f64 },

    #[error("eigensolver failed to converge at index {index}")]
    NoConvergence { index: usize },

    #[error("fit did not converge after {iterations} iterations (last iterate {last:?})")]
    FitNoConvergence { iterations: usize, last: Vec<f64> },

    #[error("singular Jacobian in least-squares fit")]
    SingularJacobian,

    #[error("fit outside its regime: {0}")]
    OutOfRegime(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("trace too short: {0}")]
    TraceTooShort(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
