use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed records: {reason}")]
    Records { path: PathBuf, reason: String },

    #[error("{failed} of {total} simulations failed")]
    TooManyFailures { failed: usize, total: usize },

    #[error("need at least {needed} valid records, got {got}")]
    TooFewRecords { needed: usize, got: usize },

    #[error(transparent)]
    Core(#[from] fgr_core::Error),

    #[error(transparent)]
    Slam(#[from] fgr_slam::SlamError),
}

impl ExperimentError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ExperimentError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Io { .. } | ExperimentError::Records { .. } => 2,
            ExperimentError::TooManyFailures { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, ExperimentError>;
