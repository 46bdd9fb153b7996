use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("operator is not Hermitian (max |M - M†| = {0:e})")]
    NotHermitian(f64),

    #[error("state is not normalized (norm = {0})")]
    NotNormalized(f64),

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("episode already finished after {0} steps")]
    EpisodeFinished(usize),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("enumeration budget exceeded: {size} sequences > budget {budget}")]
    BudgetExceeded { size: u128, budget: u128 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
