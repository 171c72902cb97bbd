//! Error taxonomy shared across the crate.

use alloc::string::String;

/// Everything that can go wrong in the numeric core.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    /// Tensor, parameter, or cache dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// A value-level precondition was violated (empty input, bad fraction, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Byte stream is not a well-formed checkpoint.
    #[error("malformed checkpoint: {0}")]
    CheckpointFormat(String),
    /// Checkpoint parses but stores a different network shape than expected.
    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),
}

pub type Result<T> = core::result::Result<T, Error>;
