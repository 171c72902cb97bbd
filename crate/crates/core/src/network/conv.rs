//! 3×3 same-padded convolution and 2×2 stride-1 max-pool primitives over
//! planar (channel-major) buffers. Convolutions unroll input patches into a
//! column matrix and hand the contraction to a GEMM kernel; the unroll is
//! tiled over pixel columns so the scratch buffer stays bounded on large
//! images. All iteration orders are fixed, so results are reproducible
//! run-to-run.

use alloc::vec;
use alloc::vec::Vec;

use super::ConvLayerParams;

/// Channel-major feature map: sample (ch, row, col) at `data[(ch*h + row)*w + col]`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Feature {
    pub ch: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Feature {
    pub fn zeros(ch: usize, h: usize, w: usize) -> Self {
        Feature {
            ch,
            h,
            w,
            data: vec![0.0; ch * h * w],
        }
    }
}

/// Budget for the unrolled patch matrix, in f64 elements (32 MiB).
const PATCH_BUF_ELEMS: usize = 1 << 22;

fn tile_cols(kdim: usize, hw: usize) -> usize {
    (PATCH_BUF_ELEMS / kdim).max(64).min(hw)
}

/// Unroll the 3×3 zero-padded neighborhoods of pixels [p0, p0+cols) into `a`:
/// a (ch·9) × cols matrix, row-major with row stride `cols`. Row order is
/// (channel, kernel row, kernel col); column order follows pixel scan order.
fn im2col(x: &Feature, p0: usize, cols: usize, a: &mut [f64]) {
    let (h, w) = (x.h, x.w);
    for ci in 0..x.ch {
        let plane = &x.data[ci * h * w..(ci + 1) * h * w];
        for kr in 0..3usize {
            let dr = kr as isize - 1;
            for kc in 0..3usize {
                let dc = kc as isize - 1;
                let row = (ci * 3 + kr) * 3 + kc;
                let out = &mut a[row * cols..(row + 1) * cols];
                // Walk [p0, p0+cols) as runs within single image rows.
                let mut j = 0usize;
                let mut p = p0;
                while j < cols {
                    let r = p / w;
                    let cs = p % w;
                    let ce = w.min(cs + (cols - j));
                    let run = ce - cs;
                    let rr = r as isize + dr;
                    if rr < 0 || rr >= h as isize {
                        out[j..j + run].fill(0.0);
                    } else {
                        let src = &plane[rr as usize * w..rr as usize * w + w];
                        // Source column c+dc must lie in [0, w).
                        let lo = cs.max((-dc).max(0) as usize);
                        let hi = ce.min((w as isize - dc) as usize);
                        if lo >= hi {
                            out[j..j + run].fill(0.0);
                        } else {
                            out[j..j + (lo - cs)].fill(0.0);
                            out[j + (lo - cs)..j + (hi - cs)].copy_from_slice(
                                &src[(lo as isize + dc) as usize..(hi as isize + dc) as usize],
                            );
                            out[j + (hi - cs)..j + run].fill(0.0);
                        }
                    }
                    j += run;
                    p += run;
                }
            }
        }
    }
}

/// Scatter-add the patch-matrix gradient `g` (same layout as `im2col`'s
/// output) back onto the input gradient. Exact transpose of the unroll.
fn col2im_add(g: &[f64], p0: usize, cols: usize, dx: &mut Feature) {
    let (h, w) = (dx.h, dx.w);
    for ci in 0..dx.ch {
        let plane = &mut dx.data[ci * h * w..(ci + 1) * h * w];
        for kr in 0..3usize {
            let dr = kr as isize - 1;
            for kc in 0..3usize {
                let dc = kc as isize - 1;
                let row = (ci * 3 + kr) * 3 + kc;
                let grow = &g[row * cols..(row + 1) * cols];
                let mut j = 0usize;
                let mut p = p0;
                while j < cols {
                    let r = p / w;
                    let cs = p % w;
                    let ce = w.min(cs + (cols - j));
                    let run = ce - cs;
                    let rr = r as isize + dr;
                    if rr >= 0 && rr < h as isize {
                        let base = rr as usize * w;
                        let lo = cs.max((-dc).max(0) as usize);
                        let hi = ce.min((w as isize - dc) as usize);
                        for c in lo..hi {
                            plane[base + (c as isize + dc) as usize] += grow[j + (c - cs)];
                        }
                    }
                    j += run;
                    p += run;
                }
            }
        }
    }
}

/// Same-padded 3×3 convolution, optionally rectified.
pub(crate) fn conv_forward(x: &Feature, layer: &ConvLayerParams, relu: bool) -> Feature {
    debug_assert_eq!(x.ch, layer.in_ch);
    let (h, w) = (x.h, x.w);
    let hw = h * w;
    let kdim = layer.in_ch * 9;
    let mut y = Feature::zeros(layer.out_ch, h, w);
    let tile = tile_cols(kdim, hw);
    let mut a = vec![0.0f64; kdim * tile];
    let mut p0 = 0;
    while p0 < hw {
        let cols = tile.min(hw - p0);
        im2col(x, p0, cols, &mut a);
        // y[:, p0..p0+cols] = kernels (out_ch × kdim) · a (kdim × cols)
        unsafe {
            matrixmultiply::dgemm(
                layer.out_ch,
                kdim,
                cols,
                1.0,
                layer.kernels.as_ptr(),
                kdim as isize,
                1,
                a.as_ptr(),
                cols as isize,
                1,
                0.0,
                y.data.as_mut_ptr().add(p0),
                hw as isize,
                1,
            );
        }
        p0 += cols;
    }
    for (o, &b) in layer.biases.iter().enumerate() {
        let plane = &mut y.data[o * hw..(o + 1) * hw];
        if relu {
            for v in plane.iter_mut() {
                *v = (*v + b).max(0.0);
            }
        } else {
            for v in plane.iter_mut() {
                *v += b;
            }
        }
    }
    y
}

/// Per-layer parameter gradients, shaped like the layer itself.
pub(crate) struct LayerGrads {
    pub kernels: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Reverse-mode step for one convolution. `y` is the layer's own
/// (post-activation) output from the forward pass; `d_out` is the gradient
/// with respect to it. Returns parameter gradients and the input gradient.
pub(crate) fn conv_backward(
    x: &Feature,
    y: &Feature,
    layer: &ConvLayerParams,
    relu: bool,
    d_out: &Feature,
) -> (LayerGrads, Feature) {
    debug_assert_eq!(x.ch, layer.in_ch);
    debug_assert_eq!(d_out.ch, layer.out_ch);
    let (h, w) = (x.h, x.w);
    let hw = h * w;
    let kdim = layer.in_ch * 9;

    // Gradient w.r.t. the pre-activation: rectification passes gradient only
    // where its output is strictly positive (the derivative at 0 is taken as 0).
    let mut dpre = d_out.data.clone();
    if relu {
        for (dv, &yv) in dpre.iter_mut().zip(&y.data) {
            if yv <= 0.0 {
                *dv = 0.0;
            }
        }
    }

    let mut dk = vec![0.0f64; layer.out_ch * kdim];
    let mut db = vec![0.0f64; layer.out_ch];
    for (o, dbo) in db.iter_mut().enumerate() {
        *dbo = dpre[o * hw..(o + 1) * hw].iter().sum();
    }

    let mut dx = Feature::zeros(layer.in_ch, h, w);
    let tile = tile_cols(kdim, hw);
    let mut a = vec![0.0f64; kdim * tile];
    let mut g = vec![0.0f64; kdim * tile];
    let mut p0 = 0;
    while p0 < hw {
        let cols = tile.min(hw - p0);
        im2col(x, p0, cols, &mut a);
        unsafe {
            // dk += dpre[:, tile] (out_ch × cols) · aᵀ (cols × kdim)
            matrixmultiply::dgemm(
                layer.out_ch,
                cols,
                kdim,
                1.0,
                dpre.as_ptr().add(p0),
                hw as isize,
                1,
                a.as_ptr(),
                1,
                cols as isize,
                1.0,
                dk.as_mut_ptr(),
                kdim as isize,
                1,
            );
            // g = kernelsᵀ (kdim × out_ch) · dpre[:, tile] (out_ch × cols)
            matrixmultiply::dgemm(
                kdim,
                layer.out_ch,
                cols,
                1.0,
                layer.kernels.as_ptr(),
                1,
                kdim as isize,
                dpre.as_ptr().add(p0),
                hw as isize,
                1,
                0.0,
                g.as_mut_ptr(),
                cols as isize,
                1,
            );
        }
        col2im_add(&g, p0, cols, &mut dx);
        p0 += cols;
    }
    (LayerGrads { kernels: dk, biases: db }, dx)
}

/// 2×2 max-pool with stride 1 and one-sided zero padding (bottom/right), so
/// spatial size is preserved. Padded cells contribute the value 0 — only
/// windows that overhang the edge see them.
pub(crate) fn pool_forward(x: &Feature) -> Feature {
    let (h, w) = (x.h, x.w);
    let mut y = Feature::zeros(x.ch, h, w);
    for c in 0..x.ch {
        let plane = &x.data[c * h * w..(c + 1) * h * w];
        let out = &mut y.data[c * h * w..(c + 1) * h * w];
        for r in 0..h {
            for col in 0..w {
                let mut m = f64::NEG_INFINITY;
                for dr in 0..2usize {
                    for dc in 0..2usize {
                        let v = if r + dr < h && col + dc < w {
                            plane[(r + dr) * w + col + dc]
                        } else {
                            0.0
                        };
                        m = m.max(v);
                    }
                }
                out[r * w + col] = m;
            }
        }
    }
    y
}

/// Max-pool gradient: each window routes its incoming gradient to the first
/// window element (scan order: (r,c), (r,c+1), (r+1,c), (r+1,c+1)) attaining
/// the maximum. Gradient claimed by a padding cell is dropped.
pub(crate) fn pool_backward(x: &Feature, d_out: &Feature) -> Feature {
    debug_assert_eq!((x.ch, x.h, x.w), (d_out.ch, d_out.h, d_out.w));
    let (h, w) = (x.h, x.w);
    let mut dx = Feature::zeros(x.ch, h, w);
    for c in 0..x.ch {
        let plane = &x.data[c * h * w..(c + 1) * h * w];
        let dplane = &d_out.data[c * h * w..(c + 1) * h * w];
        let dxp = &mut dx.data[c * h * w..(c + 1) * h * w];
        for r in 0..h {
            for col in 0..w {
                let mut best = f64::NEG_INFINITY;
                let mut best_at: Option<usize> = None;
                for dr in 0..2usize {
                    for dc in 0..2usize {
                        let (inside, v) = if r + dr < h && col + dc < w {
                            (true, plane[(r + dr) * w + col + dc])
                        } else {
                            (false, 0.0)
                        };
                        if v > best {
                            best = v;
                            best_at = inside.then(|| (r + dr) * w + col + dc);
                        }
                    }
                }
                if let Some(i) = best_at {
                    dxp[i] += dplane[r * w + col];
                }
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(in_ch: usize, out_ch: usize, kernels: Vec<f64>, biases: Vec<f64>) -> ConvLayerParams {
        ConvLayerParams {
            in_ch,
            out_ch,
            kernels,
            biases,
        }
    }

    /// Direct triple-loop convolution, independent of the unrolled path.
    fn conv_naive(x: &Feature, l: &ConvLayerParams, relu: bool) -> Feature {
        let (h, w) = (x.h, x.w);
        let mut y = Feature::zeros(l.out_ch, h, w);
        for o in 0..l.out_ch {
            for r in 0..h as isize {
                for c in 0..w as isize {
                    let mut acc = l.biases[o];
                    for i in 0..l.in_ch {
                        for kr in 0..3isize {
                            for kc in 0..3isize {
                                let (rr, cc) = (r + kr - 1, c + kc - 1);
                                if rr >= 0 && rr < h as isize && cc >= 0 && cc < w as isize {
                                    let k = l.kernels
                                        [((o * l.in_ch + i) * 3 + kr as usize) * 3 + kc as usize];
                                    acc += k * x.data[(i * h + rr as usize) * w + cc as usize];
                                }
                            }
                        }
                    }
                    y.data[(o * h + r as usize) * w + c as usize] =
                        if relu { acc.max(0.0) } else { acc };
                }
            }
        }
        y
    }

    fn pseudo(data: &mut [f64], mut seed: u64) {
        for v in data {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            *v = (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
        }
    }

    #[test]
    fn identity_kernel_reproduces_the_plane() {
        let mut x = Feature::zeros(1, 5, 5);
        pseudo(&mut x.data, 7);
        let mut kernels = vec![0.0; 9];
        kernels[4] = 1.0; // center tap
        let l = layer(1, 1, kernels, vec![0.0]);
        let y = conv_forward(&x, &l, false);
        assert_eq!(y.data, x.data);
    }

    #[test]
    fn unrolled_conv_matches_naive_oracle() {
        for &(h, w, ci, co) in &[(4usize, 4usize, 1usize, 2usize), (5, 7, 3, 4), (8, 3, 2, 5)] {
            let mut x = Feature::zeros(ci, h, w);
            pseudo(&mut x.data, 11 + h as u64);
            let mut kernels = vec![0.0; co * ci * 9];
            pseudo(&mut kernels, 23 + w as u64);
            let mut biases = vec![0.0; co];
            pseudo(&mut biases, 31);
            let l = layer(ci, co, kernels, biases);
            for relu in [false, true] {
                let fast = conv_forward(&x, &l, relu);
                let slow = conv_naive(&x, &l, relu);
                for (a, b) in fast.data.iter().zip(&slow.data) {
                    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_parameter_gradient() {
        let mut x = Feature::zeros(2, 4, 4);
        pseudo(&mut x.data, 3);
        let mut kernels = vec![0.0; 3 * 2 * 9];
        pseudo(&mut kernels, 5);
        let l = layer(2, 3, kernels, vec![0.1; 3]);
        let y = conv_forward(&x, &l, true);
        let d_out = Feature::zeros(3, 4, 4);
        let (grads, dx) = conv_backward(&x, &y, &l, true, &d_out);
        assert!(grads.kernels.iter().all(|&v| v == 0.0));
        assert!(grads.biases.iter().all(|&v| v == 0.0));
        assert!(dx.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rectification_blocks_gradient_where_clipped() {
        // Single pixel, identity-ish kernel, large negative bias: output is
        // clipped to zero everywhere, so nothing flows back.
        let mut x = Feature::zeros(1, 4, 4);
        pseudo(&mut x.data, 9);
        let mut kernels = vec![0.0; 9];
        kernels[4] = 1.0;
        let l = layer(1, 1, kernels, vec![-10.0]);
        let y = conv_forward(&x, &l, true);
        assert!(y.data.iter().all(|&v| v == 0.0));
        let mut d_out = Feature::zeros(1, 4, 4);
        d_out.data.fill(1.0);
        let (grads, dx) = conv_backward(&x, &y, &l, true, &d_out);
        assert!(grads.kernels.iter().all(|&v| v == 0.0));
        assert!(dx.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pool_preserves_size_and_takes_window_max() {
        let mut x = Feature::zeros(1, 3, 3);
        x.data.copy_from_slice(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let y = pool_forward(&x);
        assert_eq!((y.ch, y.h, y.w), (1, 3, 3));
        assert_eq!(y.data, vec![5.0, 6.0, 6.0, 8.0, 9.0, 9.0, 8.0, 9.0, 9.0]);
    }

    #[test]
    fn pool_keeps_negative_interior_maxima_but_pads_edges_with_zero() {
        let mut x = Feature::zeros(1, 2, 2);
        x.data.copy_from_slice(&[-4.0, -3.0, -2.0, -1.0]);
        let y = pool_forward(&x);
        // Top-left window is fully inside: max of the four negatives.
        assert_eq!(y.data[0], -1.0);
        // Every other window overhangs, so the zero pad wins.
        assert_eq!(&y.data[1..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn pool_gradient_routes_to_first_argmax() {
        // Tie between (0,0) and (0,1): the earlier position wins.
        let mut x = Feature::zeros(1, 2, 3);
        x.data.copy_from_slice(&[5.0, 5.0, 1.0, 0.0, 0.0, 0.0]);
        let mut d_out = Feature::zeros(1, 2, 3);
        d_out.data[0] = 1.0; // window at (0,0)
        let dx = pool_backward(&x, &d_out);
        assert_eq!(dx.data[0], 1.0);
        assert!(dx.data[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pool_gradient_claimed_by_padding_is_dropped() {
        // All-negative input: at the bottom-right window the zero pad is the
        // strict max, so its gradient vanishes.
        let mut x = Feature::zeros(1, 2, 2);
        x.data.copy_from_slice(&[-4.0, -3.0, -2.0, -1.0]);
        let mut d_out = Feature::zeros(1, 2, 2);
        d_out.data.fill(1.0);
        let dx = pool_backward(&x, &d_out);
        // Only the interior window routes gradient (to its max at (1,1)).
        assert_eq!(dx.data, vec![0.0, 0.0, 0.0, 1.0]);
    }
}
