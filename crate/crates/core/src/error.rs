use thiserror::Error;

use crate::spectral::Spectrum;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point {index} has an empty neighborhood")]
    EmptyNeighborhood { index: usize },

    #[error("{} point(s) have no neighbors (first: {})", .indices.len(), .indices[0])]
    IsolatedPoints { indices: Vec<usize> },

    #[error("row {row}: kernel sum {sum} is not usable for normalization")]
    DegenerateRow { row: usize, sum: f64 },

    #[error("eigensolver did not converge: {message}")]
    Convergence {
        message: String,
        partial: Box<Spectrum>,
    },

    #[error("residual check failed: eigenpair {index} has residual {residual:e}")]
    Residual { index: usize, residual: f64 },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
