use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RrmError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("solver did not converge after {iterations} iterations (max KKT violation {max_violation:.3e})")]
    NotConverged { iterations: u64, max_violation: f64 },

    #[error("member {index}: {source}")]
    Member {
        index: usize,
        #[source]
        source: Box<RrmError>,
    },

    #[error("pilot model for {kernel}: {source}")]
    Pilot {
        kernel: String,
        #[source]
        source: Box<RrmError>,
    },

    #[error("all prediction pairs were constant; correlation undefined")]
    UndefinedAgreement,

    #[error("no overlapping records between methods")]
    NoOverlap,

    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, RrmError>;

impl RrmError {
    pub(crate) fn member(index: usize, err: RrmError) -> Self {
        RrmError::Member {
            index,
            source: Box::new(err),
        }
    }
}
