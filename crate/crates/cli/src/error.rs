use std::path::PathBuf;

use thiserror::Error;

/// Command failures, each class with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("missing input: {0}")]
    MissingInput(PathBuf),

    #[error("no cycles: {0}")]
    NoCycles(String),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] pirl_core::Error),

    #[error("malformed {what}: {reason}")]
    Format { what: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub mod exit {
    pub const OTHER: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const MISSING_INPUT: i32 = 3;
    pub const INCOMPATIBLE_DATASET: i32 = 4;
    pub const NON_FINITE_LOSS: i32 = 5;
    pub const NO_CYCLES: i32 = 6;
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MissingInput(_) => exit::MISSING_INPUT,
            CliError::NoCycles(_) => exit::NO_CYCLES,
            CliError::Usage(_) => exit::USAGE,
            CliError::Core(pirl_core::Error::IncompatibleDataset { .. }) => {
                exit::INCOMPATIBLE_DATASET
            }
            CliError::Core(pirl_core::Error::Diverged { .. }) => exit::NON_FINITE_LOSS,
            _ => exit::OTHER,
        }
    }

    pub(crate) fn format(what: &str, reason: impl ToString) -> Self {
        CliError::Format {
            what: what.to_string(),
            reason: reason.to_string(),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::format("csv", e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::format("json", e)
    }
}

/// Fails with [`CliError::MissingInput`] unless `path` exists.
pub fn require(path: &std::path::Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingInput(path.to_path_buf()))
    }
}
