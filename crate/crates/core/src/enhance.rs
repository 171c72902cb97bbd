//! End-to-end enhancement: percentile color correction, predicted per-pixel
//! affine shift, rectification, and per-channel renormalization — plus the
//! reverse-mode companions of the non-network stages so training can push
//! gradients from the final image back into the parameters.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::color::color_correct;
use crate::error::{Error, Result};
use crate::network::{predict, NetworkParams, ShiftMaps};
use crate::tensor::ImageTensor;

/// Everything `enhance` produces: the final image, the color-corrected
/// intermediate, the predicted maps, and the per-channel maxima that the
/// final normalization divided by.
#[derive(Debug, Clone)]
pub struct EnhancementResult {
    pub output: ImageTensor,
    pub corrected: ImageTensor,
    pub maps: ShiftMaps,
    pub channel_max: [f64; 3],
}

fn check_triple(corrected: &ImageTensor, maps: &ShiftMaps) -> Result<()> {
    for (name, t) in [("scale", &maps.scale), ("offset", &maps.offset)] {
        if !t.same_shape(corrected) {
            return Err(Error::Shape(format!(
                "{name} map is {}x{}x{}, image is {}x{}x{}",
                t.height, t.width, t.channels, corrected.height, corrected.width, corrected.channels
            )));
        }
    }
    if corrected.channels != 3 {
        return Err(Error::Shape(format!(
            "shift application expects 3 channels, got {}",
            corrected.channels
        )));
    }
    Ok(())
}

/// Per-pixel, per-channel affine shift with rectification:
/// `max(0, scale*x + offset)`.
pub fn apply_shift(corrected: &ImageTensor, maps: &ShiftMaps) -> Result<ImageTensor> {
    check_triple(corrected, maps)?;
    let mut out = ImageTensor::zeros(corrected.height, corrected.width, 3);
    for (o, ((&x, &s), &b)) in out.data.iter_mut().zip(
        corrected
            .data
            .iter()
            .zip(&maps.scale.data)
            .zip(&maps.offset.data),
    ) {
        *o = (s * x + b).max(0.0);
    }
    Ok(out)
}

/// Divide each channel by its maximum so the brightest value becomes exactly
/// 1. An all-zero channel is left at zero rather than dividing by zero.
/// Returns the output and the per-channel maxima.
pub fn normalize_channels(image: &ImageTensor) -> (ImageTensor, Vec<f64>) {
    let ch = image.channels;
    let mut maxima = vec![0.0f64; ch];
    for px in image.data.chunks_exact(ch) {
        for (m, &v) in maxima.iter_mut().zip(px) {
            if v > *m {
                *m = v;
            }
        }
    }
    let mut out = image.clone();
    for px in out.data.chunks_exact_mut(ch) {
        for (v, &m) in px.iter_mut().zip(&maxima) {
            if m > 0.0 {
                *v /= m;
            } else {
                *v = 0.0;
            }
        }
    }
    (out, maxima)
}

/// Run the full pipeline on a 3-channel image.
pub fn enhance(image: &ImageTensor, params: &NetworkParams) -> Result<EnhancementResult> {
    let (corrected, _) = color_correct(image)?;
    let maps = predict(params, &corrected)?;
    let shifted = apply_shift(&corrected, &maps)?;
    let (output, maxima) = normalize_channels(&shifted);
    Ok(EnhancementResult {
        output,
        corrected,
        maps,
        channel_max: [maxima[0], maxima[1], maxima[2]],
    })
}

/// Gradients of the shift stage. `shifted` must be the exact forward output
/// so the rectification mask is reconstructed faithfully; positions clamped
/// to zero pass no gradient.
pub fn shift_backward(
    corrected: &ImageTensor,
    maps: &ShiftMaps,
    shifted: &ImageTensor,
    d_shifted: &ImageTensor,
) -> Result<(ImageTensor, ImageTensor, ImageTensor)> {
    check_triple(corrected, maps)?;
    for (name, t) in [("shift output", shifted), ("shift gradient", d_shifted)] {
        if !t.same_shape(corrected) {
            return Err(Error::Shape(format!("{name} does not match the image shape")));
        }
    }
    let n = corrected.data.len();
    let mut d_scale = ImageTensor::zeros(corrected.height, corrected.width, 3);
    let mut d_offset = d_scale.clone();
    let mut d_corrected = d_scale.clone();
    for i in 0..n {
        if shifted.data[i] > 0.0 {
            let d = d_shifted.data[i];
            d_scale.data[i] = d * corrected.data[i];
            d_offset.data[i] = d;
            d_corrected.data[i] = d * maps.scale.data[i];
        }
    }
    Ok((d_scale, d_offset, d_corrected))
}

/// Gradient of the per-channel max normalization. The maximum is treated as
/// attained at the first position reaching it in scan order; an all-zero
/// channel passes no gradient.
pub fn normalize_backward(shifted: &ImageTensor, d_output: &ImageTensor) -> Result<ImageTensor> {
    if !shifted.same_shape(d_output) {
        return Err(Error::Shape(
            "normalization gradient does not match the image shape".into(),
        ));
    }
    let ch = shifted.channels;
    let pixels = shifted.pixels();
    let mut d_in = ImageTensor::zeros(shifted.height, shifted.width, ch);
    for c in 0..ch {
        let mut m = 0.0f64;
        let mut arg = None;
        for p in 0..pixels {
            let v = shifted.data[p * ch + c];
            if v > m {
                m = v;
                arg = Some(p);
            }
        }
        let Some(arg) = arg else { continue };
        let mut weighted = 0.0f64;
        for p in 0..pixels {
            let i = p * ch + c;
            weighted += d_output.data[i] * shifted.data[i];
            d_in.data[i] = d_output.data[i] / m;
        }
        d_in.data[arg * ch + c] -= weighted / (m * m);
    }
    Ok(d_in)
}
