//! CLI error type and the exit-code contract.

use thiserror::Error;

use quanneal_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
}

impl CliError {
    /// Exit-code contract: 0 ok, 2 config, 3 numerical, 4 capacity.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                CoreError::Domain(_) | CoreError::InvalidModel(_) | CoreError::Unsupported(_) => 2,
                CoreError::Capacity { .. } => 4,
                CoreError::Numerical(_) | CoreError::DimensionMismatch { .. } => 3,
                CoreError::Io { .. } => 1,
            },
            CliError::Io { .. } => 1,
            CliError::ChecksFailed { .. } => 3,
        }
    }
}
