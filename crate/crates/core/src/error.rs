use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite: leading minor {minor} has pivot {pivot:.3e}")]
    NotPositiveDefinite { minor: usize, pivot: f64 },

    #[error("matrix is not positive semidefinite (smallest eigenvalue {eigenvalue:.3e})")]
    NotPositiveSemidefinite { eigenvalue: f64 },

    #[error("base graph not full-rank: {0}")]
    BaseNotFullRank(Box<Error>),

    #[error("factor index {index} out of range (graph has {count} factors)")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("factor {index} belongs to the base set")]
    IndexInBase { index: usize },

    #[error("invalid factor {index}: {reason}")]
    InvalidFactor { index: usize, reason: String },

    #[error("invalid antichain: {0}")]
    InvalidAntichain(String),

    #[error("predictor count {0} not supported (1..=4)")]
    UnsupportedPredictorCount(usize),

    #[error("missing Imin value for antichain {0}")]
    MissingAtom(String),

    #[error("state dimension must be 1 for quadrature, got {0}")]
    NotOneDimensional(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("graph JSON: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;
