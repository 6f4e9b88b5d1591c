//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CpsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported for this variant: {0}")]
    Unsupported(String),

    #[error("coupling containment violated in {relation} at t={time}: {detail}")]
    CouplingViolation {
        relation: &'static str,
        time: f64,
        detail: String,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CpsError>;

impl CpsError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CpsError::InvalidParameter(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        CpsError::Precondition(msg.into())
    }
}
