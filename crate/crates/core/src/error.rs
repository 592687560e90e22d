//! Error types shared across the toolkit.

use thiserror::Error;

/// Library-wide error type.
///
/// The variants map onto the CLI exit-code contract: configuration and
/// contract violations, numerical failures, and capacity overruns are
/// distinguished so callers can react differently to each.
#[derive(Debug, Error)]
pub enum Error {
    /// Mismatched dimensions between operators, vectors, or configurations.
    #[error("dimension mismatch: {context} (expected {expected}, got {actual})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// Basis would exceed the enumeration cap.
    #[error("basis of {dim} configurations exceeds the enumeration cap of {cap}")]
    Capacity { dim: u128, cap: usize },

    /// Parameter outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure failed (overflow, non-convergence).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Model violates a structural contract (bad site indices, wrong kind).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Operation does not support this model class.
    #[error("unsupported model: {0}")]
    Unsupported(String),

    /// File I/O failure, annotated with the offending path.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidModel(msg.into())
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
}
