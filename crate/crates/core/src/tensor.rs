//! Interleaved floating-point image storage.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Dense H×W×C grid of `f64` samples, row-major with interleaved channels:
/// sample (row, col, ch) lives at `data[(row * width + col) * channels + ch]`,
/// so each pixel's channel triple is contiguous. Decoded images hold values
/// in [0, 1]; intermediate maps may be unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl ImageTensor {
    /// All-zero tensor. Panics if any dimension is zero.
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        assert!(
            height > 0 && width > 0 && channels > 0,
            "tensor dimensions must be positive"
        );
        ImageTensor {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    /// Wrap an existing sample buffer, validating its length.
    pub fn from_data(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Shape(format!(
                "tensor dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "buffer holds {} samples, {height}x{width}x{channels} needs {}",
                data.len(),
                height * width * channels
            )));
        }
        Ok(ImageTensor {
            height,
            width,
            channels,
            data,
        })
    }

    /// Number of pixels (H·W).
    #[inline]
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    /// Total number of samples (H·W·C).
    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, ch: usize) -> usize {
        (row * self.width + col) * self.channels + ch
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[self.index(row, col, ch)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, ch: usize, value: f64) {
        let i = self.index(row, col, ch);
        self.data[i] = value;
    }

    #[inline]
    pub fn same_shape(&self, other: &ImageTensor) -> bool {
        self.height == other.height
            && self.width == other.width
            && self.channels == other.channels
    }

    /// Borrow one channel's samples in row-major pixel order, without copying.
    pub fn channel_view(&self, ch: usize) -> Result<ChannelView<'_>> {
        if ch >= self.channels {
            return Err(Error::InvalidArgument(format!(
                "channel {ch} out of range for a {}-channel tensor",
                self.channels
            )));
        }
        Ok(ChannelView {
            data: &self.data,
            channels: self.channels,
            channel: ch,
        })
    }

    /// Copy out the axis-aligned window with top-left (row0, col0).
    pub fn crop(&self, row0: usize, col0: usize, height: usize, width: usize) -> Result<Self> {
        if row0 + height > self.height || col0 + width > self.width || height == 0 || width == 0 {
            return Err(Error::Shape(format!(
                "crop {height}x{width}@({row0},{col0}) exceeds a {}x{} image",
                self.height, self.width
            )));
        }
        let c = self.channels;
        let mut data = Vec::with_capacity(height * width * c);
        for r in 0..height {
            let start = ((row0 + r) * self.width + col0) * c;
            data.extend_from_slice(&self.data[start..start + width * c]);
        }
        ImageTensor::from_data(height, width, c, data)
    }
}

/// Strided no-copy view of a single channel.
#[derive(Debug, Clone, Copy)]
pub struct ChannelView<'a> {
    data: &'a [f64],
    channels: usize,
    channel: usize,
}

impl<'a> ChannelView<'a> {
    /// Number of pixels in the channel.
    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.channels
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Sample of the i-th pixel (row-major order).
    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.data[i * self.channels + self.channel]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + 'a {
        self.data[self.channel..].iter().step_by(self.channels).copied()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.iter().collect()
    }
}
