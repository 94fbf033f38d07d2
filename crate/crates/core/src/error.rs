use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("spectral library is empty")]
    EmptyLibrary,

    #[error("active-set solver exceeded {0} iterations")]
    IterationLimit(usize),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("grid cell ({row}, {col}) is out of bounds for a {rows}x{cols} grid")]
    OutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("parse error in {path} at byte offset {offset}: {message}")]
    Parse {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("action {0} leaves the grid")]
    InvalidAction(String),

    #[error("covariance matrix is not positive definite even with jitter")]
    SingularCovariance,

    #[error("exploration history is empty or inconsistent")]
    EmptyHistory,

    #[error("state has no valid actions")]
    NoValidActions,

    #[error("path budget {budget} is below the direct start-to-goal cost {required}")]
    InfeasibleBudget { budget: f64, required: f64 },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("trial {trial} failed: {source}")]
    TrialFailed {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    /// True when the error stems from bad user input (files, config, arguments)
    /// rather than an internal failure.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::DimensionMismatch { .. }
            | Error::NonFinite(_)
            | Error::EmptyLibrary
            | Error::ConfigInvalid(_)
            | Error::OutOfBounds { .. }
            | Error::Parse { .. }
            | Error::InfeasibleBudget { .. }
            | Error::Serde(_) => true,
            Error::TrialFailed { source, .. } => source.is_input_error(),
            _ => false,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::ConfigInvalid(msg.into())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
