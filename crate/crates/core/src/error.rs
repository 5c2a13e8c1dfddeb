//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Matrix/vector shapes do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A construction would exceed the configured memory budget.
    #[error("resource budget exceeded: {what} needs ~{needed} bytes, budget is {budget}")]
    ResourceBudget {
        what: String,
        needed: u64,
        budget: u64,
    },

    /// A numeric routine failed to produce a usable result.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// System specification file could not be parsed.
    #[error("spec parse error: {0}")]
    Parse(String),

    /// Persisted artifact is malformed or inconsistent with the spec.
    #[error("artifact error: {0}")]
    Artifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
