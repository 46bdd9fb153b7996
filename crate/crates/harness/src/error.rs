use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] qscs_core::Error),

    #[error("invalid run configuration: {0}")]
    Config(String),

    #[error("config file {path}: {source}")]
    ConfigFile { path: PathBuf, source: serde_json::Error },

    #[error("series of length {len} is too short (need at least {need})")]
    ShortSeries { len: usize, need: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
