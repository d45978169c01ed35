use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("quadratic term is not positive semidefinite (curvature {curvature:e})")]
    NotPositiveSemidefinite { curvature: f64 },

    #[error("unbounded objective along a feasible direction")]
    Unbounded,

    #[error("solver did not converge after {iterations} iterations (kkt residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn dims(expected: usize, found: usize) -> Self {
        Error::DimensionMismatch { expected, found }
    }
}
