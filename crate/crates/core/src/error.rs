use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no route from {from} to goal")]
    NoRoute { from: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: String, got: String },

    #[error("policy capacity exceeded: {requested} policies requested, cap is {cap}")]
    Capacity { requested: u64, cap: u64 },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error(
        "insufficient odometry: need coverage up to t={needed:.3}s, have up to t={available:.3}s"
    )]
    InsufficientOdometry { needed: f64, available: f64 },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("incompatible dataset: manifest hash {manifest}, config hash {config}")]
    IncompatibleDataset { manifest: String, config: String },

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn format(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn dims(expected: impl std::fmt::Debug, got: impl std::fmt::Debug) -> Self {
        Error::Dimension {
            expected: format!("{expected:?}"),
            got: format!("{got:?}"),
        }
    }
}
