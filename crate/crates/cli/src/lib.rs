//! Command-line workbench: configuration, numerical self-checks and the
//! `validate`, `tension-strategies`, `train` and `eval` commands.

use std::path::PathBuf;

use thiserror::Error;

use tdcr_core::evaluation::EvaluationError;
use tdcr_core::learning::LearningError;

pub mod checks;
pub mod commands;
pub mod config;

pub use checks::{CheckError, CheckResult, CheckSizes};
pub use commands::{run, Cli, Command};
pub use config::WorkbenchConfig;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid snapshot: {0}")]
    Snapshot(LearningError),
    #[error("{0}")]
    CheckFailed(String),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Learning(#[from] LearningError),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl BenchError {
    /// 2 for rejected inputs, 1 for everything that failed while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            BenchError::Config(_) | BenchError::Snapshot(_) => 2,
            _ => 1,
        }
    }
}
