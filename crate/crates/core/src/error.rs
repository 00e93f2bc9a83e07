use thiserror::Error;

/// Errors raised by model construction, solvers and utilities.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SccError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("size error: {0}")]
    Size(String),
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dense size guard exceeded: n*p = {np} > {limit}")]
    SizeGuard { np: usize, limit: usize },
    #[error("search failed: {0}")]
    SearchFailed(String),
}

pub type Result<T> = std::result::Result<T, SccError>;
