//! Finite-difference verification of every analytic gradient: the
//! colorfulness score, the full training objective, the shift/normalize
//! stages, and reverse-mode differentiation through the network itself.

use aqshift_core::color::color_correct;
use aqshift_core::colorfulness::{uicm_gradient, uicm_loss};
use aqshift_core::enhance::{apply_shift, normalize_backward, normalize_channels, shift_backward};
use aqshift_core::loss::{total_loss, total_loss_gradient, LossWeights};
use aqshift_core::network::{backward, forward, LayerSpec, NetworkParams, ShiftMaps};
use aqshift_core::ImageTensor;

struct XorShift(u64);

impl XorShift {
    fn new(seed: u64) -> Self {
        XorShift(seed.wrapping_mul(6364136223846793005).max(1))
    }
    fn next_f64(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
    fn next_index(&mut self, n: usize) -> usize {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 % n as u64) as usize
    }
}

fn random_image(h: usize, w: usize, seed: u64) -> ImageTensor {
    let mut rng = XorShift::new(seed);
    let mut t = ImageTensor::zeros(h, w, 3);
    for v in &mut t.data {
        *v = rng.next_f64();
    }
    t
}

/// Relative agreement with an absolute floor for near-zero entries.
fn agree(analytic: f64, numeric: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= 1e-9 || diff <= 1e-4 * analytic.abs().max(numeric.abs())
}

fn assert_agree(analytic: f64, numeric: f64, what: &str) {
    assert!(
        agree(analytic, numeric),
        "{what}: analytic {analytic:e} vs numeric {numeric:e}"
    );
}

#[test]
fn colorfulness_gradient_matches_finite_differences() {
    let image = random_image(8, 8, 41);
    let grad = uicm_gradient(&image).unwrap();
    let h = 1e-6;
    for i in 0..image.data.len() {
        let mut plus = image.clone();
        plus.data[i] += h;
        let mut minus = image.clone();
        minus.data[i] -= h;
        let numeric = (uicm_loss(&plus).unwrap() - uicm_loss(&minus).unwrap()) / (2.0 * h);
        assert_agree(grad.data[i], numeric, &format!("uicm entry {i}"));
    }
}

#[test]
fn colorfulness_gradient_survives_real_trimming() {
    // At 12x12 the percentile bounds exclude samples at both ends, so this
    // exercises the branch where trimmed positions lose their mean term.
    let image = random_image(12, 12, 57);
    let grad = uicm_gradient(&image).unwrap();
    let h = 1e-6;
    for i in 0..image.data.len() {
        let mut plus = image.clone();
        plus.data[i] += h;
        let mut minus = image.clone();
        minus.data[i] -= h;
        let numeric = (uicm_loss(&plus).unwrap() - uicm_loss(&minus).unwrap()) / (2.0 * h);
        assert_agree(grad.data[i], numeric, &format!("trimmed uicm entry {i}"));
    }
}

#[test]
fn objective_gradient_matches_finite_differences() {
    let output = random_image(8, 8, 3);
    let target = random_image(8, 8, 4);
    let input = random_image(8, 8, 5);
    let weights = LossWeights::default();
    let grad = total_loss_gradient(&output, &target, &input, &weights).unwrap();
    let h = 1e-6;
    for i in 0..output.data.len() {
        let mut plus = output.clone();
        plus.data[i] += h;
        let mut minus = output.clone();
        minus.data[i] -= h;
        let numeric = (total_loss(&plus, &target, &input, &weights).unwrap().total
            - total_loss(&minus, &target, &input, &weights).unwrap().total)
            / (2.0 * h);
        assert_agree(grad.data[i], numeric, &format!("objective entry {i}"));
    }
}

#[test]
fn shift_and_normalize_gradients_match_finite_differences() {
    // Probe L = sum(c * normalize(shift(x, maps))) as a function of the two
    // maps; the linear functional makes the upstream gradient exact.
    let corrected = random_image(7, 6, 11);
    let mut rng = XorShift::new(99);
    let mut scale = ImageTensor::zeros(7, 6, 3);
    let mut offset = ImageTensor::zeros(7, 6, 3);
    for v in &mut scale.data {
        *v = 0.5 + rng.next_f64();
    }
    for v in &mut offset.data {
        *v = rng.next_f64() - 0.3;
    }
    let mut weights_c = ImageTensor::zeros(7, 6, 3);
    for v in &mut weights_c.data {
        *v = rng.next_f64() - 0.5;
    }
    let probe = |maps: &ShiftMaps| -> f64 {
        let shifted = apply_shift(&corrected, maps).unwrap();
        let (out, _) = normalize_channels(&shifted);
        out.data.iter().zip(&weights_c.data).map(|(&o, &c)| o * c).sum()
    };

    let maps = ShiftMaps { scale, offset };
    let shifted = apply_shift(&corrected, &maps).unwrap();
    let d_shifted = normalize_backward(&shifted, &weights_c).unwrap();
    let (d_scale, d_offset, _) = shift_backward(&corrected, &maps, &shifted, &d_shifted).unwrap();

    let h = 1e-6;
    for probe_idx in 0..60 {
        let i = rng.next_index(maps.scale.data.len());
        let on_scale = probe_idx % 2 == 0;
        let mut plus = maps.clone();
        let mut minus = maps.clone();
        if on_scale {
            plus.scale.data[i] += h;
            minus.scale.data[i] -= h;
        } else {
            plus.offset.data[i] += h;
            minus.offset.data[i] -= h;
        }
        let numeric = (probe(&plus) - probe(&minus)) / (2.0 * h);
        let analytic = if on_scale {
            d_scale.data[i]
        } else {
            d_offset.data[i]
        };
        assert_agree(analytic, numeric, &format!("map entry {i} (scale={on_scale})"));
    }
}

fn tiny_plan() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv { in_ch: 3, out_ch: 4 },
        LayerSpec::Pool,
        LayerSpec::Conv { in_ch: 4, out_ch: 6 },
    ]
}

/// Perturb one scalar parameter, by linear index over (kernels ++ biases)
/// of each conv in order.
fn nudge(params: &NetworkParams, flat: usize, h: f64) -> NetworkParams {
    let mut out = params.clone();
    let mut rest = flat;
    for conv in &mut out.convs {
        if rest < conv.kernels.len() {
            conv.kernels[rest] += h;
            return out;
        }
        rest -= conv.kernels.len();
        if rest < conv.biases.len() {
            conv.biases[rest] += h;
            return out;
        }
        rest -= conv.biases.len();
    }
    panic!("flat index {flat} out of range");
}

fn flat_grad(grads: &NetworkParams, flat: usize) -> f64 {
    let mut rest = flat;
    for conv in &grads.convs {
        if rest < conv.kernels.len() {
            return conv.kernels[rest];
        }
        rest -= conv.kernels.len();
        if rest < conv.biases.len() {
            return conv.biases[rest];
        }
        rest -= conv.biases.len();
    }
    panic!("flat index {flat} out of range");
}

#[test]
fn network_backward_matches_finite_differences_exhaustively() {
    // Small enough to probe every parameter: 334 of them.
    let params = NetworkParams::init(tiny_plan(), 8).unwrap();
    let input = random_image(8, 8, 21);
    let mut rng = XorShift::new(7);
    let mut c_scale = ImageTensor::zeros(8, 8, 3);
    let mut c_offset = ImageTensor::zeros(8, 8, 3);
    for v in &mut c_scale.data {
        *v = rng.next_f64() - 0.5;
    }
    for v in &mut c_offset.data {
        *v = rng.next_f64() - 0.5;
    }
    let probe = |p: &NetworkParams| -> f64 {
        let (maps, _) = forward(p, &input).unwrap();
        maps.scale
            .data
            .iter()
            .zip(&c_scale.data)
            .chain(maps.offset.data.iter().zip(&c_offset.data))
            .map(|(&m, &c)| m * c)
            .sum()
    };
    let (_, cache) = forward(&params, &input).unwrap();
    let (grads, _) = backward(&params, &cache, &c_scale, &c_offset).unwrap();

    let h = 1e-5;
    let total = params.param_count();
    assert_eq!(total, 334);
    for flat in 0..total {
        let numeric = (probe(&nudge(&params, flat, h)) - probe(&nudge(&params, flat, -h))) / (2.0 * h);
        assert_agree(flat_grad(&grads, flat), numeric, &format!("parameter {flat}"));
    }
}

#[test]
fn network_input_gradient_matches_finite_differences() {
    let params = NetworkParams::init(tiny_plan(), 15).unwrap();
    let input = random_image(6, 9, 33);
    let mut rng = XorShift::new(70);
    let mut c_scale = ImageTensor::zeros(6, 9, 3);
    let mut c_offset = ImageTensor::zeros(6, 9, 3);
    for v in &mut c_scale.data {
        *v = rng.next_f64() - 0.5;
    }
    for v in &mut c_offset.data {
        *v = rng.next_f64() - 0.5;
    }
    let probe = |img: &ImageTensor| -> f64 {
        let (maps, _) = forward(&params, img).unwrap();
        maps.scale
            .data
            .iter()
            .zip(&c_scale.data)
            .chain(maps.offset.data.iter().zip(&c_offset.data))
            .map(|(&m, &c)| m * c)
            .sum()
    };
    let (_, cache) = forward(&params, &input).unwrap();
    let (_, d_input) = backward(&params, &cache, &c_scale, &c_offset).unwrap();
    let h = 1e-6;
    for i in 0..input.data.len() {
        let mut plus = input.clone();
        plus.data[i] += h;
        let mut minus = input.clone();
        minus.data[i] -= h;
        let numeric = (probe(&plus) - probe(&minus)) / (2.0 * h);
        assert_agree(d_input.data[i], numeric, &format!("input pixel {i}"));
    }
}

/// The exact loss the trainer minimizes, as a black-box function of the
/// parameters.
fn pipeline_loss(
    params: &NetworkParams,
    input: &ImageTensor,
    gt: &ImageTensor,
    weights: &LossWeights,
) -> f64 {
    let (corrected, _) = color_correct(input).unwrap();
    let (maps, _) = forward(params, &corrected).unwrap();
    let shifted = apply_shift(&corrected, &maps).unwrap();
    let (output, _) = normalize_channels(&shifted);
    total_loss(&output, gt, input, weights).unwrap().total
}

fn pipeline_grads(
    params: &NetworkParams,
    input: &ImageTensor,
    gt: &ImageTensor,
    weights: &LossWeights,
) -> NetworkParams {
    let (corrected, _) = color_correct(input).unwrap();
    let (maps, cache) = forward(params, &corrected).unwrap();
    let shifted = apply_shift(&corrected, &maps).unwrap();
    let (output, _) = normalize_channels(&shifted);
    let d_output = total_loss_gradient(&output, gt, input, weights).unwrap();
    let d_shifted = normalize_backward(&shifted, &d_output).unwrap();
    let (d_scale, d_offset, _) = shift_backward(&corrected, &maps, &shifted, &d_shifted).unwrap();
    let (grads, _) = backward(params, &cache, &d_scale, &d_offset).unwrap();
    grads
}

#[test]
fn end_to_end_training_gradient_matches_finite_differences() {
    // Differentiates through normalize, rectified shift, the network, and
    // all three loss terms at once — the exact composite the trainer uses.
    let params = NetworkParams::init(tiny_plan(), 4).unwrap();
    let input = random_image(8, 8, 61);
    let gt = random_image(8, 8, 62);
    let weights = LossWeights::default();
    let grads = pipeline_grads(&params, &input, &gt, &weights);

    let h = 1e-5;
    let total = params.param_count();
    let mut rng = XorShift::new(5);
    let mut probed = 0;
    while probed < 80 {
        let flat = rng.next_index(total);
        let numeric = (pipeline_loss(&nudge(&params, flat, h), &input, &gt, &weights)
            - pipeline_loss(&nudge(&params, flat, -h), &input, &gt, &weights))
            / (2.0 * h);
        assert_agree(flat_grad(&grads, flat), numeric, &format!("pipeline parameter {flat}"));
        probed += 1;
    }
}
