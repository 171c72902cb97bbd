//! Checkpoint files: the core binary codec behind atomic file IO.

use std::fs;
use std::path::Path;

use aqshift_core::network::{decode_checkpoint, encode_checkpoint, NetworkParams};

use crate::error::AppError;
use crate::io::write_bytes_atomic;

/// Serialize and atomically write a checkpoint.
pub fn save_checkpoint(path: &Path, params: &NetworkParams) -> Result<(), AppError> {
    write_bytes_atomic(path, &encode_checkpoint(params))
}

/// Read and validate a checkpoint. Any failure — unreadable file, corrupt
/// bytes, or a layer layout the network cannot accept — is a configuration
/// error: the flag pointed at an unusable weights file.
pub fn load_checkpoint(path: &Path) -> Result<NetworkParams, AppError> {
    let bytes = fs::read(path)
        .map_err(|e| AppError::config(format!("cannot read weights {}: {e}", path.display())))?;
    decode_checkpoint(&bytes)
        .map_err(|e| AppError::config(format!("weights {}: {e}", path.display())))
}
