//! Underwater image enhancement in two stages: a non-parametric color
//! correction layer (per-channel percentile clip + affine stretch) followed by
//! a fully-convolutional network that predicts a per-pixel, channel-wise
//! affine shift. Training jointly optimizes a supervised pixel loss, an
//! unsupervised colorfulness (UICM) term, and an edge-preservation term.
//!
//! This crate is the numeric core: tensors, the correction layer, the
//! colorfulness statistics and their gradients, the network forward/backward
//! passes, the losses, full-reference metrics, and the Adam training loop.
//! It is `no_std`-compatible (`alloc` required); disable default features and
//! enable `libm` to build without the standard library. File formats, image
//! codecs, and the command-line surface live in the companion `aqshift` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_op_in_unsafe_fn)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("aqshift-core needs either the `std` or the `libm` feature for float math");

pub mod color;
pub mod colorfulness;
pub mod enhance;
pub mod error;
mod fmath;
pub mod loss;
pub mod metrics;
pub mod network;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::ImageTensor;
