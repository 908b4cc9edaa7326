use thiserror::Error;

/// Errors raised across the embedding pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("input contains no data rows")]
    EmptyInput,

    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("matrix is not positive semi-definite: lambda_min = {min:e}, lambda_max = {max:e}")]
    NotPsd { min: f64, max: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("primal infeasibility at row {index}: squared norm {found:e}, expected {expected:e}")]
    Infeasible {
        index: usize,
        expected: f64,
        found: f64,
    },

    #[error("symmetric eigensolver did not converge")]
    EigenSolver,

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
