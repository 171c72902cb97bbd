//! The fully-convolutional shift-map predictor: a fixed plan of 3×3
//! same-padded convolutions and 2×2 stride-1 max-pools that turns a 3-channel
//! image into a 6-channel feature map, split channel-wise into a per-pixel
//! scale map and offset map. Includes seeded initialization, reverse-mode
//! gradients, and a binary checkpoint codec.

mod checkpoint;
mod conv;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::fmath;
use crate::tensor::ImageTensor;
use conv::{conv_backward, conv_forward, pool_backward, pool_forward, Feature};

/// One entry of a network plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv { in_ch: usize, out_ch: usize },
    Pool,
}

/// The published layer plan: four conv/pool stages widening to 256 channels
/// and narrowing back down to the 6-channel head, 15 convolutions in all.
/// Checkpoints are only considered compatible with this plan.
pub fn standard_plan() -> Vec<LayerSpec> {
    use LayerSpec::{Conv, Pool};
    vec![
        Conv { in_ch: 3, out_ch: 64 },
        Conv { in_ch: 64, out_ch: 64 },
        Pool,
        Conv { in_ch: 64, out_ch: 128 },
        Conv { in_ch: 128, out_ch: 128 },
        Pool,
        Conv { in_ch: 128, out_ch: 256 },
        Conv { in_ch: 256, out_ch: 256 },
        Conv { in_ch: 256, out_ch: 256 },
        Conv { in_ch: 256, out_ch: 256 },
        Pool,
        Conv { in_ch: 256, out_ch: 256 },
        Conv { in_ch: 256, out_ch: 128 },
        Conv { in_ch: 128, out_ch: 64 },
        Conv { in_ch: 64, out_ch: 6 },
        Pool,
        Conv { in_ch: 6, out_ch: 6 },
        Conv { in_ch: 6, out_ch: 6 },
        Conv { in_ch: 6, out_ch: 6 },
    ]
}

/// Parameters of one convolution: 3×3 kernels stored row-major as
/// (out_ch, in_ch, 3, 3) — kernel (o, i, kr, kc) lives at
/// `kernels[((o*in_ch + i)*3 + kr)*3 + kc]` — plus one bias per output
/// channel. The same struct doubles as the per-layer gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayerParams {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernels: Vec<f64>,
    pub biases: Vec<f64>,
}

impl ConvLayerParams {
    pub fn zeros(in_ch: usize, out_ch: usize) -> Self {
        ConvLayerParams {
            in_ch,
            out_ch,
            kernels: vec![0.0; out_ch * in_ch * 9],
            biases: vec![0.0; out_ch],
        }
    }
}

/// All trainable state: the plan plus one `ConvLayerParams` per plan conv,
/// in order. Constructors uphold the plan/parameter consistency; code that
/// mutates the public fields directly is expected to preserve it.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub plan: Vec<LayerSpec>,
    pub convs: Vec<ConvLayerParams>,
}

impl NetworkParams {
    /// Zero parameters for a plan.
    pub fn zeros(plan: Vec<LayerSpec>) -> Result<Self> {
        let convs = plan
            .iter()
            .filter_map(|l| match *l {
                LayerSpec::Conv { in_ch, out_ch } => Some(ConvLayerParams::zeros(in_ch, out_ch)),
                LayerSpec::Pool => None,
            })
            .collect();
        let params = NetworkParams { plan, convs };
        params.validate()?;
        Ok(params)
    }

    /// Seeded He initialization: kernels are zero-mean normal with variance
    /// 2/(in_ch·9), biases zero. Deterministic for a given seed.
    pub fn init(plan: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        let mut params = NetworkParams::zeros(plan)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for conv in &mut params.convs {
            let sigma = fmath::sqrt(2.0 / (conv.in_ch as f64 * 9.0));
            let normal = Normal::new(0.0, sigma).expect("finite sigma");
            for k in &mut conv.kernels {
                *k = normal.sample(&mut rng);
            }
        }
        Ok(params)
    }

    /// Same-shaped zero parameters (the gradient/moment container).
    pub fn zeros_like(&self) -> Self {
        NetworkParams {
            plan: self.plan.clone(),
            convs: self
                .convs
                .iter()
                .map(|c| ConvLayerParams::zeros(c.in_ch, c.out_ch))
                .collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.convs
            .iter()
            .map(|c| c.kernels.len() + c.biases.len())
            .sum()
    }

    /// Elementwise `self += other`. Shapes must agree.
    pub fn add_assign(&mut self, other: &NetworkParams) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Shape("parameter shapes differ in add".into()));
        }
        for (a, b) in self.convs.iter_mut().zip(&other.convs) {
            for (x, y) in a.kernels.iter_mut().zip(&b.kernels) {
                *x += y;
            }
            for (x, y) in a.biases.iter_mut().zip(&b.biases) {
                *x += y;
            }
        }
        Ok(())
    }

    /// Elementwise scaling.
    pub fn scale(&mut self, s: f64) {
        for c in &mut self.convs {
            for x in &mut c.kernels {
                *x *= s;
            }
            for x in &mut c.biases {
                *x *= s;
            }
        }
    }

    pub fn same_shape(&self, other: &NetworkParams) -> bool {
        self.plan == other.plan
            && self.convs.len() == other.convs.len()
            && self
                .convs
                .iter()
                .zip(&other.convs)
                .all(|(a, b)| a.in_ch == b.in_ch && a.out_ch == b.out_ch)
    }

    /// Input channel count: the first convolution's fan-in.
    pub fn input_channels(&self) -> Result<usize> {
        self.plan
            .iter()
            .find_map(|l| match *l {
                LayerSpec::Conv { in_ch, .. } => Some(in_ch),
                LayerSpec::Pool => None,
            })
            .ok_or_else(|| Error::Shape("plan has no convolution layers".into()))
    }

    /// Check plan/parameter consistency and channel chaining.
    pub fn validate(&self) -> Result<()> {
        let conv_specs: Vec<(usize, usize)> = self
            .plan
            .iter()
            .filter_map(|l| match *l {
                LayerSpec::Conv { in_ch, out_ch } => Some((in_ch, out_ch)),
                LayerSpec::Pool => None,
            })
            .collect();
        if conv_specs.is_empty() {
            return Err(Error::Shape("plan has no convolution layers".into()));
        }
        if conv_specs.len() != self.convs.len() {
            return Err(Error::Shape(format!(
                "plan lists {} convolutions but {} parameter sets are present",
                conv_specs.len(),
                self.convs.len()
            )));
        }
        let mut current: Option<usize> = None;
        for (idx, ((in_ch, out_ch), conv)) in conv_specs.iter().zip(&self.convs).enumerate() {
            if conv.in_ch != *in_ch || conv.out_ch != *out_ch {
                return Err(Error::Shape(format!(
                    "conv {idx} parameters are {}→{} but the plan says {}→{}",
                    conv.in_ch, conv.out_ch, in_ch, out_ch
                )));
            }
            if *in_ch == 0 || *out_ch == 0 {
                return Err(Error::Shape(format!("conv {idx} has a zero channel count")));
            }
            if conv.kernels.len() != out_ch * in_ch * 9 || conv.biases.len() != *out_ch {
                return Err(Error::Shape(format!(
                    "conv {idx} buffer lengths do not match its {}→{} shape",
                    in_ch, out_ch
                )));
            }
            if let Some(c) = current {
                if c != *in_ch {
                    return Err(Error::Shape(format!(
                        "conv {idx} expects {in_ch} input channels but the previous layer produces {c}"
                    )));
                }
            }
            current = Some(*out_ch);
        }
        Ok(())
    }
}

/// He-initialized parameters for the standard plan.
pub fn init_params(seed: u64) -> NetworkParams {
    NetworkParams::init(standard_plan(), seed).expect("the standard plan is well-formed")
}

/// The network's output, split channel-wise: the first three channels scale
/// the corrected image per pixel, the last three shift it.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftMaps {
    pub scale: ImageTensor,
    pub offset: ImageTensor,
}

/// Activations retained by `forward` for the backward pass: the planar input
/// plus every layer output, in order.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    plan: Vec<LayerSpec>,
    height: usize,
    width: usize,
    features: Vec<Feature>,
}

fn tensor_to_feature(t: &ImageTensor) -> Feature {
    let (h, w, ch) = (t.height, t.width, t.channels);
    let mut f = Feature::zeros(ch, h, w);
    for c in 0..ch {
        for p in 0..h * w {
            f.data[c * h * w + p] = t.data[p * ch + c];
        }
    }
    f
}

fn feature_to_tensor(f: &Feature) -> ImageTensor {
    let (h, w, ch) = (f.h, f.w, f.ch);
    let mut t = ImageTensor::zeros(h, w, ch);
    for c in 0..ch {
        for p in 0..h * w {
            t.data[p * ch + c] = f.data[c * h * w + p];
        }
    }
    t
}

/// Extract channels [c0, c0+3) of a planar feature as an interleaved tensor.
fn feature_slice_to_tensor(f: &Feature, c0: usize) -> ImageTensor {
    let (h, w) = (f.h, f.w);
    let mut t = ImageTensor::zeros(h, w, 3);
    for c in 0..3 {
        for p in 0..h * w {
            t.data[p * 3 + c] = f.data[(c0 + c) * h * w + p];
        }
    }
    t
}

fn check_forward_input(params: &NetworkParams, input: &ImageTensor) -> Result<usize> {
    params.validate()?;
    let expect = params.input_channels()?;
    if input.channels != expect {
        return Err(Error::Shape(format!(
            "network expects {expect}-channel input, got {}",
            input.channels
        )));
    }
    if input.height < 4 || input.width < 4 {
        return Err(Error::Shape(format!(
            "spatial size {}x{} is below the 4x4 minimum",
            input.height, input.width
        )));
    }
    let out_ch = params
        .convs
        .last()
        .map(|c| c.out_ch)
        .expect("validate guarantees at least one conv");
    if out_ch != 6 {
        return Err(Error::Shape(format!(
            "plan must end in a 6-channel head to form the shift maps, ends in {out_ch}"
        )));
    }
    Ok(expect)
}

fn run_forward(
    params: &NetworkParams,
    input: &ImageTensor,
    keep: bool,
) -> Result<(ShiftMaps, Option<ForwardCache>)> {
    check_forward_input(params, input)?;
    let last_conv = params
        .plan
        .iter()
        .rposition(|l| matches!(l, LayerSpec::Conv { .. }))
        .expect("validated plan has a conv");
    let mut features: Vec<Feature> = Vec::new();
    let mut cur = tensor_to_feature(input);
    let mut conv_idx = 0usize;
    for (i, spec) in params.plan.iter().enumerate() {
        let next = match spec {
            LayerSpec::Conv { .. } => {
                let layer = &params.convs[conv_idx];
                conv_idx += 1;
                // Every convolution is rectified except the final one, which
                // must be free to emit signed maps.
                conv_forward(&cur, layer, i != last_conv)
            }
            LayerSpec::Pool => pool_forward(&cur),
        };
        if keep {
            features.push(core::mem::replace(&mut cur, next));
        } else {
            cur = next;
        }
    }
    let maps = ShiftMaps {
        scale: feature_slice_to_tensor(&cur, 0),
        offset: feature_slice_to_tensor(&cur, 3),
    };
    let cache = if keep {
        features.push(cur);
        Some(ForwardCache {
            plan: params.plan.clone(),
            height: input.height,
            width: input.width,
            features,
        })
    } else {
        None
    };
    Ok((maps, cache))
}

/// Forward pass retaining activations for `backward`.
pub fn forward(params: &NetworkParams, input: &ImageTensor) -> Result<(ShiftMaps, ForwardCache)> {
    let (maps, cache) = run_forward(params, input, true)?;
    Ok((maps, cache.expect("cache requested")))
}

/// Inference-only forward pass: same result as `forward`, constant memory.
pub fn predict(params: &NetworkParams, input: &ImageTensor) -> Result<ShiftMaps> {
    Ok(run_forward(params, input, false)?.0)
}

/// Reverse-mode pass. `d_scale`/`d_offset` are gradients w.r.t. the two
/// output maps; returns gradients for every parameter (shaped like `params`)
/// and the gradient w.r.t. the network input.
pub fn backward(
    params: &NetworkParams,
    cache: &ForwardCache,
    d_scale: &ImageTensor,
    d_offset: &ImageTensor,
) -> Result<(NetworkParams, ImageTensor)> {
    params.validate()?;
    if cache.plan != params.plan || cache.features.len() != params.plan.len() + 1 {
        return Err(Error::Shape(
            "activation cache was not produced by these parameters".into(),
        ));
    }
    let (h, w) = (cache.height, cache.width);
    for d in [d_scale, d_offset] {
        if d.height != h || d.width != w || d.channels != 3 {
            return Err(Error::Shape(format!(
                "map gradient is {}x{}x{}, expected {h}x{w}x3",
                d.height, d.width, d.channels
            )));
        }
    }

    let mut d_cur = Feature::zeros(6, h, w);
    for c in 0..3 {
        for p in 0..h * w {
            d_cur.data[c * h * w + p] = d_scale.data[p * 3 + c];
            d_cur.data[(c + 3) * h * w + p] = d_offset.data[p * 3 + c];
        }
    }

    let last_conv = params
        .plan
        .iter()
        .rposition(|l| matches!(l, LayerSpec::Conv { .. }))
        .expect("validated plan has a conv");
    let mut grads = params.zeros_like();
    let mut conv_idx = params.convs.len();
    for (i, spec) in params.plan.iter().enumerate().rev() {
        let x = &cache.features[i];
        match spec {
            LayerSpec::Conv { .. } => {
                conv_idx -= 1;
                let layer = &params.convs[conv_idx];
                let y = &cache.features[i + 1];
                let (lg, dx) = conv_backward(x, y, layer, i != last_conv, &d_cur);
                grads.convs[conv_idx].kernels = lg.kernels;
                grads.convs[conv_idx].biases = lg.biases;
                d_cur = dx;
            }
            LayerSpec::Pool => {
                d_cur = pool_backward(x, &d_cur);
            }
        }
    }
    Ok((grads, feature_to_tensor(&d_cur)))
}
