use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounding box: {0}")]
    InvalidBox(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: String, reason: String },

    #[error("point ({x}, {y}, {z}) lies outside the bounding box")]
    PointOutsideBox { x: f64, y: f64, z: f64 },

    #[error("partition resolution mismatch: expected K={expected}, got K={got}")]
    ResolutionMismatch { expected: u8, got: u8 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid resource combination: {0}")]
    InvalidCombination(String),

    #[error("empty dataset")]
    EmptyData,

    #[error("population too small: need at least 2 individuals, got {0}")]
    PopulationTooSmall(usize),

    #[error(
        "no feasible initial population after {attempts} attempts \
         (accuracy failures: {accuracy}, topology failures: {topology}, delay/bandwidth failures: {delay}); \
         dominant failure: {dominant}"
    )]
    InitExhausted {
        attempts: usize,
        accuracy: usize,
        topology: usize,
        delay: usize,
        dominant: &'static str,
    },

    #[error("search space too large for exhaustive enumeration: {0} combinations")]
    SearchSpaceTooLarge(u128),

    #[error("model file format: {0}")]
    ModelFormat(String),

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

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("constraint violated in emitted solution: {0}")]
    ConstraintViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
