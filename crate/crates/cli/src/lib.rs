//! Library surface of the quanneal CLI, split out so the orchestration is
//! testable without spawning processes.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use output::{CheckResult, RunReport};
pub use run::{run_experiment, Subcommand};
