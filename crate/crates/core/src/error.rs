use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("matrix is not symmetric (|a[{row}][{col}] - a[{col}][{row}]| = {gap:e})")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("variance `{name}` must be positive and finite, got {value}")]
    NonPositiveVariance { name: &'static str, value: f64 },

    #[error("track range must be positive and finite, got {0} m")]
    NonPositiveRange(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid probability kernel: {0}")]
    InvalidKernel(String),

    #[error("index {index} out of range for {len} entries")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure in trial {trial}, track {stage}, CPI {cpi}: {source}")]
    Simulation {
        trial: usize,
        stage: usize,
        cpi: usize,
        #[source]
        source: Box<Error>,
    },

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
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at(self, trial: usize, stage: usize, cpi: usize) -> Self {
        match self {
            e @ Error::Simulation { .. } => e,
            e => Error::Simulation {
                trial,
                stage,
                cpi,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
