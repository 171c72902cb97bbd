//! Non-parametric color correction: per-channel percentile clipping followed
//! by an affine stretch onto [0, 1]. This is the pipeline's first stage and
//! carries no trainable parameters; bounds are recomputed per image and the
//! stage is excluded from gradient flow.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;
use crate::tensor::ImageTensor;

/// Percentile fractions used by the correction layer (and mirrored by the
/// colorfulness statistics): 1st and 99th.
pub const CLIP_LOW: f64 = 0.01;
pub const CLIP_HIGH: f64 = 0.99;

/// Clip bounds for one channel; both are attained sample values
/// (nearest-rank percentiles), so `lower <= upper` always holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Index of the nearest-rank percentile in a sorted sample of length `n`:
/// `max(ceil(p·n), 1) − 1`.
pub(crate) fn nearest_rank_index(p: f64, n: usize) -> usize {
    let rank = fmath::ceil(p * n as f64) as usize;
    rank.max(1) - 1
}

/// Nearest-rank percentile bounds of a sample.
pub fn percentile_bounds(samples: &[f64], p_low: f64, p_high: f64) -> Result<ChannelBounds> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "percentile bounds of an empty sample".into(),
        ));
    }
    if !(0.0..=1.0).contains(&p_low) || !(0.0..=1.0).contains(&p_high) || p_low >= p_high {
        return Err(Error::InvalidArgument(format!(
            "percentile fractions must satisfy 0 <= low < high <= 1, got ({p_low}, {p_high})"
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    Ok(ChannelBounds {
        lower: sorted[nearest_rank_index(p_low, n)],
        upper: sorted[nearest_rank_index(p_high, n)],
    })
}

/// Bilateral restraint: clamp every sample into `[lower, upper]`, in place.
pub fn clamp_channel(samples: &mut [f64], bounds: ChannelBounds) {
    for x in samples {
        *x = (*x).max(bounds.lower).min(bounds.upper);
    }
}

/// Affine stretch of clamped samples onto [0, 1], in place. A degenerate
/// channel (`upper == lower`) maps to all zeros so constant inputs stay total.
pub fn stretch_channel(samples: &mut [f64], bounds: ChannelBounds) {
    let range = bounds.upper - bounds.lower;
    if range == 0.0 {
        samples.fill(0.0);
        return;
    }
    for x in samples {
        *x = (*x - bounds.lower) / range;
    }
}

/// Full correction of a 3-channel image: per channel, clip to the 1st/99th
/// nearest-rank percentiles and stretch the result onto [0, 1]. Returns the
/// corrected image and the bounds that produced it.
pub fn color_correct(image: &ImageTensor) -> Result<(ImageTensor, [ChannelBounds; 3])> {
    if image.channels != 3 {
        return Err(Error::Shape(format!(
            "color correction expects 3 channels, got {}",
            image.channels
        )));
    }
    let mut out = image.clone();
    let mut all_bounds = [ChannelBounds { lower: 0.0, upper: 0.0 }; 3];
    for c in 0..3 {
        let mut channel: Vec<f64> = image.channel_view(c)?.to_vec();
        let bounds = percentile_bounds(&channel, CLIP_LOW, CLIP_HIGH)?;
        clamp_channel(&mut channel, bounds);
        stretch_channel(&mut channel, bounds);
        for (i, v) in channel.into_iter().enumerate() {
            out.data[i * 3 + c] = v;
        }
        all_bounds[c] = bounds;
    }
    Ok((out, all_bounds))
}
