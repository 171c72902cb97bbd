//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "AQSH" | u32 version | u32 conv count
//! per conv: u32 out_ch | u32 in_ch | u32 kh | u32 kw
//!           out_ch*in_ch*kh*kw f64 kernel weights (out, in, kh, kw order)
//!           out_ch f64 biases
//! ```
//!
//! Decoding reconstructs parameters for the standard plan only — the format
//! records no pool positions, so layer shapes are the compatibility check.
//! Structural damage (bad magic, unknown version, truncation, trailing
//! bytes, non-3×3 kernels) is `CheckpointFormat`; a clean file whose layer
//! shapes belong to some other plan is `IncompatibleCheckpoint`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{standard_plan, ConvLayerParams, LayerSpec, NetworkParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"AQSH";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialize parameters. Works for any plan; only standard-plan checkpoints
/// can be decoded back.
pub fn encode_checkpoint(params: &NetworkParams) -> Vec<u8> {
    let body: usize = params
        .convs
        .iter()
        .map(|c| 16 + 8 * (c.kernels.len() + c.biases.len()))
        .sum();
    let mut out = Vec::with_capacity(12 + body);
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.convs.len() as u32).to_le_bytes());
    for conv in &params.convs {
        out.extend_from_slice(&(conv.out_ch as u32).to_le_bytes());
        out.extend_from_slice(&(conv.in_ch as u32).to_le_bytes());
        out.extend_from_slice(&3u32.to_le_bytes());
        out.extend_from_slice(&3u32.to_le_bytes());
        for k in &conv.kernels {
            out.extend_from_slice(&k.to_le_bytes());
        }
        for b in &conv.biases {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::CheckpointFormat(format!("truncated while reading {what}")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4-byte slice")))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let b = self.take(8 * n, what)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }
}

/// Deserialize a standard-plan checkpoint.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<NetworkParams> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::CheckpointFormat("bad magic".into()));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointFormat(format!(
            "unsupported version {version}"
        )));
    }
    let plan = standard_plan();
    let expected: Vec<(usize, usize)> = plan
        .iter()
        .filter_map(|l| match *l {
            LayerSpec::Conv { in_ch, out_ch } => Some((in_ch, out_ch)),
            LayerSpec::Pool => None,
        })
        .collect();
    let count = r.u32("conv count")? as usize;
    if count != expected.len() {
        return Err(Error::IncompatibleCheckpoint(format!(
            "checkpoint holds {count} convolutions, the network has {}",
            expected.len()
        )));
    }
    let mut convs = Vec::with_capacity(count);
    for (idx, (in_ch, out_ch)) in expected.iter().enumerate() {
        let what = || -> String { format!("conv {idx} header") };
        let got_out = r.u32(&what())? as usize;
        let got_in = r.u32(&what())? as usize;
        let kh = r.u32(&what())? as usize;
        let kw = r.u32(&what())? as usize;
        if (kh, kw) != (3, 3) {
            return Err(Error::CheckpointFormat(format!(
                "conv {idx} declares {kh}x{kw} kernels, the format is 3x3 only"
            )));
        }
        if got_out != *out_ch || got_in != *in_ch {
            return Err(Error::IncompatibleCheckpoint(format!(
                "conv {idx} is {got_in}→{got_out} in the checkpoint but {in_ch}→{out_ch} in the network"
            )));
        }
        let kernels = r.f64s(got_out * got_in * 9, &format!("conv {idx} kernels"))?;
        let biases = r.f64s(got_out, &format!("conv {idx} biases"))?;
        convs.push(ConvLayerParams {
            in_ch: got_in,
            out_ch: got_out,
            kernels,
            biases,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::CheckpointFormat(format!(
            "{} trailing bytes after the last layer",
            bytes.len() - r.pos
        )));
    }
    let params = NetworkParams { plan, convs };
    params.validate()?;
    Ok(params)
}
