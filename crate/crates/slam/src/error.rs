use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SlamError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("degenerate range-bearing geometry (pose {pose}, landmark {landmark})")]
    DegenerateGeometry { pose: usize, landmark: usize },

    #[error("degenerate alignment: {0}")]
    DegenerateAlignment(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid factor subset: {0}")]
    InvalidSubset(String),

    #[error("normal equations not solvable: {0}")]
    SingularSystem(String),

    #[error("cannot marginalize landmarks: {0}")]
    Marginalization(String),

    #[error(transparent)]
    Core(#[from] fgr_core::Error),

    #[error("world JSON: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, SlamError>;
