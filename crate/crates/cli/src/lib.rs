//! Experiment driver library behind the `hdmart` binary: configuration,
//! replication scheduling, distance/bound pipelines, and report output.

pub mod commands;
pub mod config;
pub mod report;
pub mod runner;

/// Process-level error taxonomy; `exit_code` fixes the contract
/// (0 success, 1 check failure, 2 configuration or I/O error).
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::CheckFailed(_) => 1,
            _ => 2,
        }
    }
}
