//! Application layer for the enhancement pipeline: image file IO, checkpoint
//! files, dataset pairing, loss logging, and the four batch subcommands.
//! All numeric work lives in `aqshift-core`; this crate owns everything that
//! touches the filesystem.

pub mod checkpoint;
pub mod commands;
pub mod dataset;
pub mod error;
pub mod io;
pub mod losslog;

pub use error::AppError;
