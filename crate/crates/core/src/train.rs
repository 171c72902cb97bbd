//! Gradient training of the shift predictor: Adam over mini-batches of
//! (input, ground-truth) pairs, with optional random square crops and an
//! observer hook for logging and checkpointing.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::color::color_correct;
use crate::enhance::{apply_shift, normalize_backward, normalize_channels, shift_backward};
use crate::error::{Error, Result};
use crate::loss::{total_loss, total_loss_gradient, LossBreakdown, LossWeights};
use crate::network::{backward, forward, standard_plan, NetworkParams};
use crate::tensor::ImageTensor;
use crate::fmath;

/// Adam moment estimates plus the running decay powers. The powers are
/// maintained multiplicatively so a long run never re-exponentiates.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    beta1_pow: f64,
    beta2_pow: f64,
    m: NetworkParams,
    v: NetworkParams,
}

impl AdamState {
    /// Fresh state shaped like the given parameters.
    pub fn new(like: &NetworkParams) -> Self {
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            beta1_pow: 1.0,
            beta2_pow: 1.0,
            m: like.zeros_like(),
            v: like.zeros_like(),
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut NetworkParams,
    grads: &NetworkParams,
    lr: f64,
) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.m) {
        return Err(Error::Shape(
            "optimizer state, parameters, and gradients must share a shape".into(),
        ));
    }
    state.step += 1;
    state.beta1_pow *= state.beta1;
    state.beta2_pow *= state.beta2;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let (c1, c2) = (1.0 - state.beta1_pow, 1.0 - state.beta2_pow);
    for (li, conv) in params.convs.iter_mut().enumerate() {
        let g = &grads.convs[li];
        let ms = &mut state.m.convs[li];
        let vs = &mut state.v.convs[li];
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let mh = *m / c1;
            let vh = *v / c2;
            *p -= lr * mh / (fmath::sqrt(vh) + eps);
        };
        for i in 0..conv.kernels.len() {
            update(&mut conv.kernels[i], g.kernels[i], &mut ms.kernels[i], &mut vs.kernels[i]);
        }
        for i in 0..conv.biases.len() {
            update(&mut conv.biases[i], g.biases[i], &mut ms.biases[i], &mut vs.biases[i]);
        }
    }
    Ok(())
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weights: LossWeights,
    pub seed: u64,
    /// Invoke the checkpoint hook every this many optimizer steps; 0 never.
    pub checkpoint_every: u64,
    /// Train on random square crops of this side instead of whole images.
    pub patch_size: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1,
            batch_size: 1,
            lr: 0.0000125,
            weights: LossWeights::default(),
            seed: 0,
            checkpoint_every: 0,
            patch_size: None,
        }
    }
}

/// Losses of one optimizer step (term-wise batch means).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub losses: LossBreakdown,
}

/// Callbacks invoked during training. `on_checkpoint` receives the live
/// parameters mutably, so an implementation can persist them — or swap in a
/// freshly reloaded copy to prove a save/resume round trip changes nothing.
pub trait TrainObserver {
    fn on_step(&mut self, _record: &StepRecord) {}
    fn on_checkpoint(&mut self, _step: u64, _params: &mut NetworkParams) {}
}

/// No-op observer.
impl TrainObserver for () {}

fn validate_inputs(config: &TrainConfig, pairs: &[(ImageTensor, ImageTensor)]) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no training pairs supplied".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    if !(config.lr > 0.0 && config.lr.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be positive and finite, got {}",
            config.lr
        )));
    }
    for (idx, (input, gt)) in pairs.iter().enumerate() {
        if !input.same_shape(gt) {
            return Err(Error::Shape(format!(
                "pair {idx}: input is {}x{} but ground truth is {}x{}",
                input.height, input.width, gt.height, gt.width
            )));
        }
        if input.channels != 3 {
            return Err(Error::Shape(format!(
                "pair {idx}: expected 3 channels, got {}",
                input.channels
            )));
        }
        let min_side = input.height.min(input.width);
        match config.patch_size {
            Some(p) => {
                if p < 4 {
                    return Err(Error::InvalidArgument(format!(
                        "patch size {p} is below the 4-pixel network minimum"
                    )));
                }
                if p > min_side {
                    return Err(Error::InvalidArgument(format!(
                        "patch size {p} exceeds pair {idx}, which is {}x{}",
                        input.height, input.width
                    )));
                }
            }
            None => {
                if min_side < 4 {
                    return Err(Error::Shape(format!(
                        "pair {idx} is {}x{}, below the 4x4 network minimum",
                        input.height, input.width
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Train the network. Starts from `initial` when given (any plan ending in
/// the 6-channel head), otherwise from a seeded standard-plan
/// initialization. Pairs are consumed in a fixed order; crop positions come
/// from a dedicated random stream, so a run is fully determined by its
/// configuration. Returns the final parameters and one record per optimizer
/// step.
pub fn train(
    config: &TrainConfig,
    pairs: &[(ImageTensor, ImageTensor)],
    initial: Option<NetworkParams>,
    observer: &mut dyn TrainObserver,
) -> Result<(NetworkParams, Vec<StepRecord>)> {
    validate_inputs(config, pairs)?;
    let mut params = match initial {
        Some(p) => {
            p.validate()?;
            p
        }
        None => NetworkParams::init(standard_plan(), config.seed)?,
    };
    // Crop positions draw from stream 1 so they are independent of the
    // weight initialization, which consumes stream 0 of the same seed.
    let mut crop_rng = ChaCha8Rng::seed_from_u64(config.seed);
    crop_rng.set_stream(1);
    let mut state = AdamState::new(&params);
    let mut history = Vec::new();

    let indices: Vec<usize> = (0..pairs.len()).collect();
    for _ in 0..config.epochs {
        for chunk in indices.chunks(config.batch_size) {
            let mut grads = params.zeros_like();
            let (mut pixel, mut uicm, mut edge) = (0.0f64, 0.0f64, 0.0f64);
            for &i in chunk {
                let (raw_input, raw_gt) = &pairs[i];
                let (input, gt) = match config.patch_size {
                    Some(p) => {
                        let r0 = crop_rng.random_range(0..=raw_input.height - p);
                        let c0 = crop_rng.random_range(0..=raw_input.width - p);
                        (raw_input.crop(r0, c0, p, p)?, raw_gt.crop(r0, c0, p, p)?)
                    }
                    None => (raw_input.clone(), raw_gt.clone()),
                };
                let (corrected, _) = color_correct(&input)?;
                let (maps, cache) = forward(&params, &corrected)?;
                let shifted = apply_shift(&corrected, &maps)?;
                let (output, _) = normalize_channels(&shifted);
                let losses = total_loss(&output, &gt, &input, &config.weights)?;
                pixel += losses.pixel;
                uicm += losses.uicm;
                edge += losses.edge;
                let d_output = total_loss_gradient(&output, &gt, &input, &config.weights)?;
                let d_shifted = normalize_backward(&shifted, &d_output)?;
                let (d_scale, d_offset, _) = shift_backward(&corrected, &maps, &shifted, &d_shifted)?;
                let (item_grads, _) = backward(&params, &cache, &d_scale, &d_offset)?;
                grads.add_assign(&item_grads)?;
            }
            let k = chunk.len() as f64;
            grads.scale(1.0 / k);
            adam_step(&mut state, &mut params, &grads, config.lr)?;
            let record = StepRecord {
                step: state.step,
                losses: LossBreakdown::new(pixel / k, uicm / k, edge / k, config.weights),
            };
            observer.on_step(&record);
            history.push(record);
            if config.checkpoint_every > 0 && state.step % config.checkpoint_every == 0 {
                observer.on_checkpoint(state.step, &mut params);
            }
        }
    }
    Ok((params, history))
}
