use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the analysis library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("duplicate firm id `{0}` in metadata")]
    DuplicateFirm(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("undefined result: {0}")]
    Undefined(String),

    #[error("power-law fit failed: {0}")]
    FitFailure(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
