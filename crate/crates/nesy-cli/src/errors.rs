//! CLI error taxonomy with a stable exit-code contract:
//! 0 success, 1 configuration error, 2 data error, 3 internal error.

use nesy_core::tasks::TaskError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<TaskError> for CliError {
    fn from(e: TaskError) -> Self {
        match e {
            TaskError::Config(m) => CliError::Config(m),
            TaskError::Io(_)
            | TaskError::Json(_)
            | TaskError::BadMagic(_)
            | TaskError::TruncatedPayload { .. } => CliError::Data(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
