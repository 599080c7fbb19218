use thiserror::Error;

use crate::lp::LpError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Bloch vector: {0}")]
    InvalidVector(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{what}: size {size} exceeds guard {limit}")]
    GuardExceeded {
        what: &'static str,
        size: u128,
        limit: u128,
    },

    #[error("LP backend failure: {0}")]
    Lp(#[from] LpError),

    #[error("duality gap {gap:e} between primal {primal} and dual {dual}")]
    DualityGap { primal: f64, dual: f64, gap: f64 },

    #[error("rationalization failed: {0}")]
    Rationalization(String),

    #[error("certificate not achieved with denominator {denominator}: margin {margin}")]
    CertificateNotAchieved { denominator: u64, margin: String },

    #[error("certificate replay failed: {0}")]
    CertificateInvalid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
