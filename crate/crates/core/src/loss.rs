//! The training objective: a pixel-fidelity term, a colorfulness reward, and
//! an edge-preservation term, combined as
//! `total = w_pixel * pixel - w_colorfulness * uicm + w_edge * edge`.
//! The colorfulness term is subtracted: richer color lowers the loss.

use alloc::format;

use crate::colorfulness::{uicm_gradient, uicm_loss};
use crate::error::{Error, Result};
use crate::tensor::ImageTensor;

/// Term weights. The defaults put pixel fidelity first, with the
/// colorfulness reward three orders of magnitude down and the edge term one
/// further.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub pixel: f64,
    pub colorfulness: f64,
    pub edge: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            pixel: 1.0,
            colorfulness: 0.001,
            edge: 0.0001,
        }
    }
}

/// The three raw terms plus their weighted combination. `total` is always
/// derived from the other fields by `new`, so the linear identity holds
/// bitwise on every breakdown this module hands out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub pixel: f64,
    pub uicm: f64,
    pub edge: f64,
    pub total: f64,
    pub weights: LossWeights,
}

impl LossBreakdown {
    pub fn new(pixel: f64, uicm: f64, edge: f64, weights: LossWeights) -> Self {
        let total = weights.pixel * pixel - weights.colorfulness * uicm + weights.edge * edge;
        LossBreakdown {
            pixel,
            uicm,
            edge,
            total,
            weights,
        }
    }
}

fn check_same_shape(a: &ImageTensor, b: &ImageTensor, what: &str) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::Shape(format!(
            "{what}: {}x{}x{} vs {}x{}x{}",
            a.height, a.width, a.channels, b.height, b.width, b.channels
        )));
    }
    Ok(())
}

/// Mean squared error over every element.
pub fn pixel_loss(output: &ImageTensor, target: &ImageTensor) -> Result<f64> {
    check_same_shape(output, target, "pixel loss operands differ")?;
    let n = output.data.len() as f64;
    let sum: f64 = output
        .data
        .iter()
        .zip(&target.data)
        .map(|(&o, &t)| (o - t) * (o - t))
        .sum();
    Ok(sum / n)
}

/// Forward-difference gradients per channel. The last column of the
/// horizontal image and the last row of the vertical one are zero, keeping
/// both the same shape as the input. Requires at least 2x2 spatial extent.
pub fn image_gradients(t: &ImageTensor) -> Result<(ImageTensor, ImageTensor)> {
    if t.height < 2 || t.width < 2 {
        return Err(Error::Shape(format!(
            "gradients need at least 2x2 spatial extent, got {}x{}",
            t.height, t.width
        )));
    }
    let (h, w, ch) = (t.height, t.width, t.channels);
    let mut gx = ImageTensor::zeros(h, w, ch);
    let mut gy = ImageTensor::zeros(h, w, ch);
    for r in 0..h {
        for c in 0..w {
            for k in 0..ch {
                let i = (r * w + c) * ch + k;
                if c + 1 < w {
                    gx.data[i] = t.data[i + ch] - t.data[i];
                }
                if r + 1 < h {
                    gy.data[i] = t.data[i + w * ch] - t.data[i];
                }
            }
        }
    }
    Ok((gx, gy))
}

/// Mean absolute difference of squared gradient magnitudes, horizontal plus
/// vertical. Symmetric in its arguments.
pub fn edge_loss(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    check_same_shape(a, b, "edge loss operands differ")?;
    let (ax, ay) = image_gradients(a)?;
    let (bx, by) = image_gradients(b)?;
    let n = a.data.len() as f64;
    let term = |p: &ImageTensor, q: &ImageTensor| -> f64 {
        p.data
            .iter()
            .zip(&q.data)
            .map(|(&u, &v)| crate::fmath::abs(u * u - v * v))
            .sum::<f64>()
            / n
    };
    Ok(term(&ax, &bx) + term(&ay, &by))
}

/// Full objective for one output: pixel error against the ground truth,
/// colorfulness of the output itself, and edge fidelity against the original
/// input image.
pub fn total_loss(
    output: &ImageTensor,
    target: &ImageTensor,
    input: &ImageTensor,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    check_same_shape(output, input, "loss input operands differ")?;
    let pixel = pixel_loss(output, target)?;
    let uicm = uicm_loss(output)?;
    let edge = edge_loss(input, output)?;
    Ok(LossBreakdown::new(pixel, uicm, edge, *weights))
}

/// Gradient of `total_loss` with respect to the output image.
pub fn total_loss_gradient(
    output: &ImageTensor,
    target: &ImageTensor,
    input: &ImageTensor,
    weights: &LossWeights,
) -> Result<ImageTensor> {
    check_same_shape(output, target, "pixel loss operands differ")?;
    check_same_shape(output, input, "loss input operands differ")?;
    let (h, w, ch) = (output.height, output.width, output.channels);
    let n = output.data.len() as f64;

    let mut grad = ImageTensor::zeros(h, w, ch);
    for (g, (&o, &t)) in grad.data.iter_mut().zip(output.data.iter().zip(&target.data)) {
        *g = weights.pixel * 2.0 * (o - t) / n;
    }

    let colorful = uicm_gradient(output)?;
    for (g, &u) in grad.data.iter_mut().zip(&colorful.data) {
        *g -= weights.colorfulness * u;
    }

    // Edge term: differentiate mean|Ix^2 - Ox^2| through Ox = gx(output),
    // then push the forward difference back with its transpose. The i-th
    // entry of the transpose is dgx(i-1) - dgx(i); dgx is zero on the last
    // column by construction, so out-of-range neighbors contribute nothing.
    let (ix, iy) = image_gradients(input)?;
    let (ox, oy) = image_gradients(output)?;
    let sign = |d: f64| -> f64 {
        if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    let mut dgx = ImageTensor::zeros(h, w, ch);
    let mut dgy = ImageTensor::zeros(h, w, ch);
    for i in 0..output.data.len() {
        dgx.data[i] = sign(ix.data[i] * ix.data[i] - ox.data[i] * ox.data[i])
            * (-2.0 * ox.data[i])
            / n;
        dgy.data[i] = sign(iy.data[i] * iy.data[i] - oy.data[i] * oy.data[i])
            * (-2.0 * oy.data[i])
            / n;
    }
    for r in 0..h {
        for c in 0..w {
            for k in 0..ch {
                let i = (r * w + c) * ch + k;
                let mut d = 0.0;
                if c > 0 {
                    d += dgx.data[i - ch];
                }
                d -= dgx.data[i];
                if r > 0 {
                    d += dgy.data[i - w * ch];
                }
                d -= dgy.data[i];
                grad.data[i] += weights.edge * d;
            }
        }
    }
    Ok(grad)
}
