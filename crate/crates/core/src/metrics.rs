//! Full-reference quality metrics for unit-range images: mean squared
//! error, peak signal-to-noise ratio, and structural similarity.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;
use crate::tensor::ImageTensor;

/// The three metrics for one image pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub mse: f64,
    pub psnr: f64,
    pub ssim: f64,
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 1e-4; // (0.01 * peak)^2 with peak 1
const SSIM_C2: f64 = 9e-4; // (0.03 * peak)^2

fn check_same_shape(a: &ImageTensor, b: &ImageTensor) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::Shape(format!(
            "metric operands differ: {}x{}x{} vs {}x{}x{}",
            a.height, a.width, a.channels, b.height, b.width, b.channels
        )));
    }
    Ok(())
}

/// Mean squared error over every element.
pub fn mse(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    check_same_shape(a, b)?;
    let n = a.data.len() as f64;
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum();
    Ok(sum / n)
}

/// PSNR in decibels for a given peak value. Identical images (zero error)
/// report positive infinity.
pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * fmath::log10(peak * peak / mse)
    }
}

/// PSNR between two unit-range images.
pub fn psnr(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?, 1.0))
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as isize;
    let mut w = Vec::with_capacity(SSIM_WINDOW * SSIM_WINDOW);
    for i in -half..=half {
        for j in -half..=half {
            let d2 = (i * i + j * j) as f64;
            w.push(fmath::exp(-d2 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)));
        }
    }
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}

/// Mean structural similarity: an 11x11 Gaussian-weighted window slides over
/// every fully-interior position of each channel, and the per-position
/// scores are averaged across positions and then channels. Images must be at
/// least 11x11.
pub fn ssim(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    check_same_shape(a, b)?;
    if a.height < SSIM_WINDOW || a.width < SSIM_WINDOW {
        return Err(Error::Shape(format!(
            "structural similarity needs at least {SSIM_WINDOW}x{SSIM_WINDOW} images, got {}x{}",
            a.height, a.width
        )));
    }
    let window = gaussian_window();
    let (h, w, ch) = (a.height, a.width, a.channels);
    let positions = ((h - SSIM_WINDOW + 1) * (w - SSIM_WINDOW + 1)) as f64;
    let mut channel_mean = 0.0;
    for k in 0..ch {
        let mut acc = 0.0;
        for r0 in 0..=h - SSIM_WINDOW {
            for c0 in 0..=w - SSIM_WINDOW {
                let mut mx = 0.0;
                let mut my = 0.0;
                let mut wxx = 0.0;
                let mut wyy = 0.0;
                let mut wxy = 0.0;
                for (wi, &wv) in window.iter().enumerate() {
                    let r = r0 + wi / SSIM_WINDOW;
                    let c = c0 + wi % SSIM_WINDOW;
                    let i = (r * w + c) * ch + k;
                    let x = a.data[i];
                    let y = b.data[i];
                    mx += wv * x;
                    my += wv * y;
                    wxx += wv * (x * x);
                    wyy += wv * (y * y);
                    // x*y first keeps the whole statistic symmetric in the
                    // two images down to the last bit.
                    wxy += wv * (x * y);
                }
                let vx = wxx - mx * mx;
                let vy = wyy - my * my;
                let cov = wxy - mx * my;
                let num = (2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2);
                let den = (mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2);
                acc += num / den;
            }
        }
        channel_mean += acc / positions;
    }
    Ok(channel_mean / ch as f64)
}

/// All three metrics at once.
pub fn compare(a: &ImageTensor, b: &ImageTensor) -> Result<MetricReport> {
    let mse = mse(a, b)?;
    Ok(MetricReport {
        mse,
        psnr: psnr_from_mse(mse, 1.0),
        ssim: ssim(a, b)?,
    })
}
