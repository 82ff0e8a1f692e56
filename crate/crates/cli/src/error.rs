use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error(transparent)]
    Core(#[from] gmv_core::Error),

    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// 0 success, 1 I/O, 2 validation, 3 solver non-convergence.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Core(gmv_core::Error::NotConverged { .. } | gmv_core::Error::Quadrature { .. }) => 3,
            _ => 2,
        }
    }
}

pub fn invalid<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Validation(msg.into()))
}
