//! Process-level error type. The exit-code contract is stable: 0 success,
//! 1 data/input problems, 2 configuration/weights problems.

use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    /// Bad or missing input data: unreadable images, empty directories,
    /// unpairable datasets. Exit code 1.
    #[error("{0}")]
    Data(String),
    /// Bad configuration: invalid hyperparameters, unusable weight files.
    /// Exit code 2.
    #[error("{0}")]
    Config(String),
}

impl AppError {
    pub fn data(msg: impl Into<String>) -> Self {
        AppError::Data(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        AppError::Config(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            AppError::Data(_) => ExitCode::from(1),
            AppError::Config(_) => ExitCode::from(2),
        }
    }
}
