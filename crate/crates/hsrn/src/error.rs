//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by transforms, the network, training, and imaging.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an argument contract (bad dimensions, empty input,
    /// out-of-range setting, malformed kernel, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two operands that must agree in shape do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Training produced a non-finite loss or gradient and cannot continue.
    #[error("training diverged at iteration {iteration}: {reason}")]
    Divergence { iteration: usize, reason: String },

    /// An image could not be decoded or encoded.
    #[error("image error: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn mismatch(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
