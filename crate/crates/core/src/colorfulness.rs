//! UICM colorfulness statistics and the unsupervised colorfulness loss:
//! opponent chrominance planes, alpha-trimmed mean / full-population variance,
//! the regression-weighted raw score, its normalization, and an analytic
//! gradient so the score can participate in a trained objective.

use alloc::format;
use alloc::vec::Vec;

use crate::color::{nearest_rank_index, CLIP_HIGH, CLIP_LOW};
use crate::error::{Error, Result};
use crate::fmath;
use crate::tensor::ImageTensor;

/// Chrominance planes of an RGB image: `rg = R − G`, `yb = (R+G)/2 − B`,
/// one value per pixel in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct OpponentPlanes {
    pub rg: Vec<f64>,
    pub yb: Vec<f64>,
}

/// Trimmed location and dispersion of one plane: `mean` over the samples
/// inside the percentile bounds, `variance` as the full-population second
/// moment about that mean, plus how many samples fell strictly outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrimmedStats {
    pub mean: f64,
    pub variance: f64,
    pub trimmed_below: usize,
    pub trimmed_above: usize,
}

/// Regression constants of the colorfulness score and the observed range
/// used to normalize it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UicmConstants {
    pub alpha1: f64,
    pub alpha2: f64,
    pub l_min: f64,
    pub l_max: f64,
}

impl Default for UicmConstants {
    fn default() -> Self {
        UicmConstants {
            alpha1: -0.0268,
            alpha2: 0.1586,
            l_min: -0.0379009235,
            l_max: 0.897177084,
        }
    }
}

impl UicmConstants {
    /// Map a raw score onto the normalized scale: 0 at `l_min`, 1 at `l_max`.
    /// Deliberately not clamped — scores outside the regression range keep
    /// a live gradient.
    #[inline]
    pub fn normalize(&self, raw: f64) -> f64 {
        (raw - self.l_min) / (self.l_max - self.l_min)
    }
}

/// Split a 3-channel image into its opponent chrominance planes.
pub fn opponent_planes(image: &ImageTensor) -> Result<OpponentPlanes> {
    if image.channels != 3 {
        return Err(Error::Shape(format!(
            "opponent planes need 3 channels, got {}",
            image.channels
        )));
    }
    let n = image.pixels();
    let mut rg = Vec::with_capacity(n);
    let mut yb = Vec::with_capacity(n);
    for px in image.data.chunks_exact(3) {
        let (r, g, b) = (px[0], px[1], px[2]);
        rg.push(r - g);
        yb.push((r + g) / 2.0 - b);
    }
    Ok(OpponentPlanes { rg, yb })
}

/// Alpha-trimmed statistics of a plane. Samples strictly below the lower
/// nearest-rank percentile or strictly above the upper one are excluded from
/// the mean; the variance is the full-population average of squared
/// deviations about that trimmed mean.
pub fn trimmed_stats(plane: &[f64], p_low: f64, p_high: f64) -> Result<TrimmedStats> {
    let detail = plane_detail(plane, p_low, p_high)?;
    Ok(TrimmedStats {
        mean: detail.mean,
        variance: detail.variance,
        trimmed_below: detail.trimmed_below,
        trimmed_above: detail.trimmed_above,
    })
}

/// Everything the gradient needs about one plane, computed in one pass.
struct PlaneDetail {
    mean: f64,
    variance: f64,
    trimmed_below: usize,
    trimmed_above: usize,
    lower: f64,
    upper: f64,
    /// Number of retained samples.
    kept: usize,
    /// Σ over all samples of (x − mean).
    residual_sum: f64,
}

fn plane_detail(plane: &[f64], p_low: f64, p_high: f64) -> Result<PlaneDetail> {
    if plane.is_empty() {
        return Err(Error::InvalidArgument(
            "trimmed statistics of an empty plane".into(),
        ));
    }
    if !(0.0..=1.0).contains(&p_low) || !(0.0..=1.0).contains(&p_high) || p_low >= p_high {
        return Err(Error::InvalidArgument(format!(
            "trim fractions must satisfy 0 <= low < high <= 1, got ({p_low}, {p_high})"
        )));
    }
    let n = plane.len();
    let mut sorted = plane.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let lower = sorted[nearest_rank_index(p_low, n)];
    let upper = sorted[nearest_rank_index(p_high, n)];
    // Strict counts: boundary-valued samples stay in the trimmed mean, so the
    // retained set can never be empty.
    let trimmed_below = sorted.partition_point(|&x| x < lower);
    let trimmed_above = n - sorted.partition_point(|&x| x <= upper);
    let kept = n - trimmed_below - trimmed_above;
    assert!(kept > 0, "nearest-rank bounds always retain a sample");
    let mean = sorted[trimmed_below..n - trimmed_above].iter().sum::<f64>() / kept as f64;
    let mut variance = 0.0;
    let mut residual_sum = 0.0;
    for &x in plane {
        let d = x - mean;
        variance += d * d;
        residual_sum += d;
    }
    variance /= n as f64;
    Ok(PlaneDetail {
        mean,
        variance,
        trimmed_below,
        trimmed_above,
        lower,
        upper,
        kept,
        residual_sum,
    })
}

/// Raw colorfulness score: a weighted sum of chrominance magnitude
/// `sqrt(mean_rg² + mean_yb²)` and dispersion `sqrt(var_rg + var_yb)`,
/// with the trim fractions mirroring the color correction layer.
pub fn uicm_raw(image: &ImageTensor) -> Result<f64> {
    let c = UicmConstants::default();
    let planes = opponent_planes(image)?;
    let rg = plane_detail(&planes.rg, CLIP_LOW, CLIP_HIGH)?;
    let yb = plane_detail(&planes.yb, CLIP_LOW, CLIP_HIGH)?;
    let magnitude = fmath::sqrt(rg.mean * rg.mean + yb.mean * yb.mean);
    let dispersion = fmath::sqrt(rg.variance + yb.variance);
    Ok(c.alpha1 * magnitude + c.alpha2 * dispersion)
}

/// Normalized colorfulness score (0 at the regression minimum, 1 at the
/// maximum, unclamped outside).
pub fn uicm_loss(image: &ImageTensor) -> Result<f64> {
    let c = UicmConstants::default();
    Ok(c.normalize(uicm_raw(image)?))
}

/// Analytic gradient of `uicm_loss` with respect to every image sample.
///
/// Sort order and trim membership are held fixed at the evaluation point
/// (the standard subgradient through order statistics); at zero radicands
/// the corresponding square-root term's gradient is taken as 0.
pub fn uicm_gradient(image: &ImageTensor) -> Result<ImageTensor> {
    let c = UicmConstants::default();
    let planes = opponent_planes(image)?;
    let rg = plane_detail(&planes.rg, CLIP_LOW, CLIP_HIGH)?;
    let yb = plane_detail(&planes.yb, CLIP_LOW, CLIP_HIGH)?;

    let magnitude = fmath::sqrt(rg.mean * rg.mean + yb.mean * yb.mean);
    let dispersion = fmath::sqrt(rg.variance + yb.variance);
    // d raw / d mean_p and d raw / d variance_p for each plane p.
    let (dmean_rg, dmean_yb) = if magnitude > 0.0 {
        (c.alpha1 * rg.mean / magnitude, c.alpha1 * yb.mean / magnitude)
    } else {
        (0.0, 0.0)
    };
    let dvar = if dispersion > 0.0 {
        c.alpha2 / (2.0 * dispersion)
    } else {
        0.0
    };
    let scale = 1.0 / (c.l_max - c.l_min);

    let n = image.pixels() as f64;
    let plane_grad = |detail: &PlaneDetail, samples: &[f64], dmean: f64| -> Vec<f64> {
        let k = detail.kept as f64;
        samples
            .iter()
            .map(|&x| {
                let retained = x >= detail.lower && x <= detail.upper;
                // Via the trimmed mean: d mean / d x = [retained] / kept, which
                // also perturbs every residual inside the variance.
                let mut g = 2.0 / n * (x - detail.mean) * dvar;
                if retained {
                    g += dmean / k - 2.0 * detail.residual_sum / (n * k) * dvar;
                }
                g
            })
            .collect()
    };
    let grad_rg = plane_grad(&rg, &planes.rg, dmean_rg);
    let grad_yb = plane_grad(&yb, &planes.yb, dmean_yb);

    let mut out = ImageTensor::zeros(image.height, image.width, 3);
    for (i, (&grg, &gyb)) in grad_rg.iter().zip(&grad_yb).enumerate() {
        // rg = R − G; yb = (R + G)/2 − B.
        out.data[i * 3] = scale * (grg + 0.5 * gyb);
        out.data[i * 3 + 1] = scale * (-grg + 0.5 * gyb);
        out.data[i * 3 + 2] = scale * (-gyb);
    }
    Ok(out)
}
