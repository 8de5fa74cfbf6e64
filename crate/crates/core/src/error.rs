use thiserror::Error;

/// Errors raised by instance construction, solvers, estimators and the harness.
#[derive(Debug, Error)]
pub enum E2dError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("not a probability vector: {0}")]
    NotSimplex(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<E2dError>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, E2dError>;

pub(crate) fn check_index(what: &'static str, index: usize, size: usize) -> Result<()> {
    if index < size {
        Ok(())
    } else {
        Err(E2dError::IndexOutOfRange { what, index, size })
    }
}
