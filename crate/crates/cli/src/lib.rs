//! Experiment runner behind the `padicwalk` binary.

pub mod config;
pub mod emit;
pub mod run;
mod verify;

pub use config::ExperimentConfig;
pub use run::{run, Command, RunOptions};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Tolerance(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Tolerance(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<padicwalk_core::Error> for CliError {
    fn from(e: padicwalk_core::Error) -> Self {
        if e.is_tolerance() {
            CliError::Tolerance(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}
