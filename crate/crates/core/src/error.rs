use thiserror::Error;

use crate::linalg::PcgReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid knot vector: {0}")]
    InvalidKnotVector(String),

    #[error("parameter {0} outside [0, 1]")]
    OutOfDomain(f64),

    #[error("singular geometry map: det J = {det:e} at {point:?}")]
    SingularGeometry { det: f64, point: Vec<f64> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("topology: {0}")]
    Topology(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("matrix is singular at pivot {pivot}")]
    Singular { pivot: usize },

    #[error("matrix is not positive definite at pivot {pivot} (d = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("PCG did not converge within {} iterations", .report.iterations)]
    NotConverged { report: Box<PcgReport> },

    #[error("configuration: {0}")]
    Config(String),

    #[error("runtime: {0}")]
    Runtime(String),

    #[error("consistency: {0}")]
    Consistency(String),

    #[error("parse: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Prefix the message of a structured error with some context, keeping
    /// the variant when it carries data callers match on.
    pub fn context(self, what: &str) -> Error {
        match self {
            Error::Config(m) => Error::Config(format!("{what}: {m}")),
            Error::Runtime(m) => Error::Runtime(format!("{what}: {m}")),
            Error::Topology(m) => Error::Topology(format!("{what}: {m}")),
            Error::Unsupported(m) => Error::Unsupported(format!("{what}: {m}")),
            other => other,
        }
    }
}
