//! Library half of the `hsrn` command-line tool.
//!
//! The binary in `main.rs` is a thin argument-parsing wrapper; everything it
//! does lives here so integration tests can drive the same code paths
//! directly.

pub mod commands;
pub mod model_file;
pub mod run_config;

use thiserror::Error;

/// CLI-level errors carrying the process exit code.
///
/// Exit codes: 0 success, 1 unexpected I/O or internal failure, 2 bad
/// usage/config, 3 training divergence, 4 corrupt or invalid model file.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Diverged(String),
    #[error("{0}")]
    CorruptModel(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::CorruptModel(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl From<hsrn::Error> for CliError {
    fn from(err: hsrn::Error) -> CliError {
        match err {
            hsrn::Error::Divergence { .. } => CliError::Diverged(err.to_string()),
            hsrn::Error::InvalidArgument(_) | hsrn::Error::DimensionMismatch(_) => {
                CliError::Usage(err.to_string())
            }
            hsrn::Error::Image(_) | hsrn::Error::Io(_) => CliError::Other(err.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> CliError {
        CliError::Other(err.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> CliError {
        CliError::Other(format!("csv: {err}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
