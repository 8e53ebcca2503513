//! Layer primitives and their vector-Jacobian products.
//!
//! The public functions validate shapes and operate on [`FeatureMap`]s. The
//! `*_raw` / `*_backward` kernels work on flat slices and are shared by the
//! eager path and by [`crate::tape::GradTape`].

use crate::error::{Error, Result};
use crate::tensor::{axis_geometry, ConvSpec, FeatureMap, Padding, Tensor};

/// Spatial layout of one convolution call after shape checks.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeometry {
    pub in_h: usize,
    pub in_w: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub pad_top: usize,
    pub pad_left: usize,
}

impl ConvGeometry {
    pub(crate) fn new(in_h: usize, in_w: usize, spec: &ConvSpec) -> Result<Self> {
        let (out_h, pad_top) = spec.output_len(in_h)?;
        let (out_w, pad_left) = spec.output_len(in_w)?;
        Ok(Self {
            in_h,
            in_w,
            out_h,
            out_w,
            pad_top,
            pad_left,
        })
    }

    /// Input coordinate of tap `k` for output coordinate `o`, if in bounds.
    #[inline]
    fn tap(o: usize, k: usize, stride: usize, dilation: usize, pad: usize, len: usize) -> Option<usize> {
        let pos = (o * stride + k * dilation) as isize - pad as isize;
        (pos >= 0 && (pos as usize) < len).then_some(pos as usize)
    }
}

pub(crate) fn check_conv_shapes(in_depth: usize, kernel: &Tensor, bias: &[f64], spec: &ConvSpec) -> Result<()> {
    spec.validate()?;
    if in_depth != spec.in_depth {
        return Err(Error::contract(format!(
            "convolution expects input depth {}, got {in_depth}",
            spec.in_depth
        )));
    }
    if kernel.shape() != spec.kernel_shape().as_slice() {
        return Err(Error::contract(format!(
            "kernel shape {:?} does not match spec {:?}",
            kernel.shape(),
            spec.kernel_shape()
        )));
    }
    if bias.len() != spec.out_depth {
        return Err(Error::contract(format!(
            "bias length {} does not match output depth {}",
            bias.len(),
            spec.out_depth
        )));
    }
    Ok(())
}

pub(crate) fn conv2d_raw(input: &[f64], geo: &ConvGeometry, kernel: &[f64], bias: &[f64], spec: &ConvSpec) -> Vec<f64> {
    let (cin, cout, k) = (spec.in_depth, spec.out_depth, spec.kernel_size);
    let mut out = Vec::with_capacity(geo.out_h * geo.out_w * cout);
    for _ in 0..geo.out_h * geo.out_w {
        out.extend_from_slice(bias);
    }
    for oy in 0..geo.out_h {
        for ky in 0..k {
            let Some(iy) = ConvGeometry::tap(oy, ky, spec.stride, spec.dilation, geo.pad_top, geo.in_h) else {
                continue;
            };
            for ox in 0..geo.out_w {
                let out_px = &mut out[(oy * geo.out_w + ox) * cout..][..cout];
                for kx in 0..k {
                    let Some(ix) = ConvGeometry::tap(ox, kx, spec.stride, spec.dilation, geo.pad_left, geo.in_w) else {
                        continue;
                    };
                    let in_px = &input[(iy * geo.in_w + ix) * cin..][..cin];
                    let taps = &kernel[(ky * k + kx) * cin * cout..][..cin * cout];
                    for (ci, &x) in in_px.iter().enumerate() {
                        if x == 0.0 {
                            continue;
                        }
                        let row = &taps[ci * cout..][..cout];
                        for (o, &w) in out_px.iter_mut().zip(row) {
                            *o += x * w;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradients of a convolution: `(d_input, d_kernel, d_bias)`.
/// `d_input` is only computed when `want_input` is set.
pub(crate) fn conv2d_backward(
    input: &[f64],
    geo: &ConvGeometry,
    kernel: &[f64],
    spec: &ConvSpec,
    grad_out: &[f64],
    want_input: bool,
) -> (Option<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let (cin, cout, k) = (spec.in_depth, spec.out_depth, spec.kernel_size);
    let mut d_kernel = vec![0.0; kernel.len()];
    let mut d_bias = vec![0.0; cout];
    let mut d_input = want_input.then(|| vec![0.0; input.len()]);

    for g in grad_out.chunks_exact(cout) {
        for (b, &v) in d_bias.iter_mut().zip(g) {
            *b += v;
        }
    }
    for oy in 0..geo.out_h {
        for ky in 0..k {
            let Some(iy) = ConvGeometry::tap(oy, ky, spec.stride, spec.dilation, geo.pad_top, geo.in_h) else {
                continue;
            };
            for ox in 0..geo.out_w {
                let g = &grad_out[(oy * geo.out_w + ox) * cout..][..cout];
                for kx in 0..k {
                    let Some(ix) = ConvGeometry::tap(ox, kx, spec.stride, spec.dilation, geo.pad_left, geo.in_w) else {
                        continue;
                    };
                    let in_off = (iy * geo.in_w + ix) * cin;
                    let tap_off = (ky * k + kx) * cin * cout;
                    for ci in 0..cin {
                        let x = input[in_off + ci];
                        let row = tap_off + ci * cout;
                        if x != 0.0 {
                            for (dw, &gv) in d_kernel[row..row + cout].iter_mut().zip(g) {
                                *dw += x * gv;
                            }
                        }
                        if let Some(di) = d_input.as_mut() {
                            let w = &kernel[row..row + cout];
                            let mut acc = 0.0;
                            for (&wv, &gv) in w.iter().zip(g) {
                                acc += wv * gv;
                            }
                            di[in_off + ci] += acc;
                        }
                    }
                }
            }
        }
    }
    (d_input, d_kernel, d_bias)
}

/// 2-D convolution with zero padding, stride and dilation.
///
/// Each output value is the bias plus the sum of input·kernel over the dilated
/// `k × k` neighbourhood.
pub fn conv2d(input: &FeatureMap, kernels: &Tensor, bias: &[f64], spec: &ConvSpec) -> Result<FeatureMap> {
    check_conv_shapes(input.depth(), kernels, bias, spec)?;
    if !input.is_finite() {
        return Err(Error::NonFinite("convolution input"));
    }
    let geo = ConvGeometry::new(input.height(), input.width(), spec)?;
    let out = conv2d_raw(input.data(), &geo, kernels.data(), bias, spec);
    Ok(FeatureMap::from_raw(geo.out_h, geo.out_w, spec.out_depth, out))
}

pub(crate) fn depthwise_spec(kernel: &Tensor) -> Result<ConvSpec> {
    match kernel.shape() {
        &[k, k2, c] if k == k2 => {
            let spec = ConvSpec::same(k, c, c);
            spec.validate()?;
            Ok(spec)
        }
        other => Err(Error::contract(format!(
            "depthwise kernel must be (k, k, depth), got {other:?}"
        ))),
    }
}

/// Per-channel spatial convolution, stride 1, same-half padding.
pub(crate) fn depthwise_raw(
    input: &[f64],
    geo: &ConvGeometry,
    kernel: &[f64],
    bias: &[f64],
    spec: &ConvSpec,
) -> Vec<f64> {
    let (c, k) = (spec.in_depth, spec.kernel_size);
    let mut out = Vec::with_capacity(geo.out_h * geo.out_w * c);
    for _ in 0..geo.out_h * geo.out_w {
        out.extend_from_slice(bias);
    }
    for oy in 0..geo.out_h {
        for ky in 0..k {
            let Some(iy) = ConvGeometry::tap(oy, ky, 1, spec.dilation, geo.pad_top, geo.in_h) else {
                continue;
            };
            for ox in 0..geo.out_w {
                let out_px = &mut out[(oy * geo.out_w + ox) * c..][..c];
                for kx in 0..k {
                    let Some(ix) = ConvGeometry::tap(ox, kx, 1, spec.dilation, geo.pad_left, geo.in_w) else {
                        continue;
                    };
                    let in_px = &input[(iy * geo.in_w + ix) * c..][..c];
                    let taps = &kernel[(ky * k + kx) * c..][..c];
                    for ((o, &x), &w) in out_px.iter_mut().zip(in_px).zip(taps) {
                        *o += x * w;
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn depthwise_backward(
    input: &[f64],
    geo: &ConvGeometry,
    kernel: &[f64],
    spec: &ConvSpec,
    grad_out: &[f64],
    want_input: bool,
) -> (Option<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let (c, k) = (spec.in_depth, spec.kernel_size);
    let mut d_kernel = vec![0.0; kernel.len()];
    let mut d_bias = vec![0.0; c];
    let mut d_input = want_input.then(|| vec![0.0; input.len()]);
    for g in grad_out.chunks_exact(c) {
        for (b, &v) in d_bias.iter_mut().zip(g) {
            *b += v;
        }
    }
    for oy in 0..geo.out_h {
        for ky in 0..k {
            let Some(iy) = ConvGeometry::tap(oy, ky, 1, spec.dilation, geo.pad_top, geo.in_h) else {
                continue;
            };
            for ox in 0..geo.out_w {
                let g = &grad_out[(oy * geo.out_w + ox) * c..][..c];
                for kx in 0..k {
                    let Some(ix) = ConvGeometry::tap(ox, kx, 1, spec.dilation, geo.pad_left, geo.in_w) else {
                        continue;
                    };
                    let in_off = (iy * geo.in_w + ix) * c;
                    let tap_off = (ky * k + kx) * c;
                    for ch in 0..c {
                        d_kernel[tap_off + ch] += input[in_off + ch] * g[ch];
                    }
                    if let Some(di) = d_input.as_mut() {
                        for ch in 0..c {
                            di[in_off + ch] += kernel[tap_off + ch] * g[ch];
                        }
                    }
                }
            }
        }
    }
    (d_input, d_kernel, d_bias)
}

/// Per-channel `k × k` convolution (stride 1, same-half padding) with bias.
pub fn depthwise_conv2d(input: &FeatureMap, kernels: &Tensor, bias: &[f64]) -> Result<FeatureMap> {
    let spec = depthwise_spec(kernels)?;
    if input.depth() != spec.in_depth || bias.len() != spec.in_depth {
        return Err(Error::contract(format!(
            "depthwise kernel depth {} vs input depth {} and bias length {}",
            spec.in_depth,
            input.depth(),
            bias.len()
        )));
    }
    if !input.is_finite() {
        return Err(Error::NonFinite("depthwise input"));
    }
    let geo = ConvGeometry::new(input.height(), input.width(), &spec)?;
    let out = depthwise_raw(input.data(), &geo, kernels.data(), bias, &spec);
    Ok(FeatureMap::from_raw(geo.out_h, geo.out_w, spec.out_depth, out))
}

/// Depthwise spatial convolution followed by a 1×1 cross-channel convolution.
///
/// `point_kernels` has shape `(1, 1, in_depth, out_depth)`.
pub fn depthwise_separable_conv2d(
    input: &FeatureMap,
    depth_kernels: &Tensor,
    depth_bias: &[f64],
    point_kernels: &Tensor,
    point_bias: &[f64],
) -> Result<FeatureMap> {
    let spatial = depthwise_conv2d(input, depth_kernels, depth_bias)?;
    let out_depth = match point_kernels.shape() {
        &[1, 1, _, out] => out,
        other => {
            return Err(Error::contract(format!(
                "pointwise kernel must be (1, 1, in, out), got {other:?}"
            )))
        }
    };
    conv2d(
        &spatial,
        point_kernels,
        point_bias,
        &ConvSpec::same(1, spatial.depth(), out_depth),
    )
}

/// 2×2 max pooling, stride 2, windows truncated at odd borders.
/// Returns the pooled values and the flat input index chosen for each output.
pub(crate) fn max_pool_raw(input: &[f64], h: usize, w: usize, c: usize) -> (Vec<f64>, Vec<usize>, usize, usize) {
    let (oh, _) = axis_geometry(h, 2, 2, Padding::SameHalf).expect("same-half never fails");
    let ow = w.div_ceil(2);
    let mut out = vec![f64::NEG_INFINITY; oh * ow * c];
    let mut arg = vec![0usize; oh * ow * c];
    for oy in 0..oh {
        for ox in 0..ow {
            let base = (oy * ow + ox) * c;
            for iy in 2 * oy..(2 * oy + 2).min(h) {
                for ix in 2 * ox..(2 * ox + 2).min(w) {
                    let ib = (iy * w + ix) * c;
                    for ch in 0..c {
                        let v = input[ib + ch];
                        if v > out[base + ch] {
                            out[base + ch] = v;
                            arg[base + ch] = ib + ch;
                        }
                    }
                }
            }
        }
    }
    (out, arg, oh, ow)
}

/// 2×2 max pooling with stride 2; output size is `ceil(h/2) × ceil(w/2)`.
pub fn max_pool2d(input: &FeatureMap) -> FeatureMap {
    let (out, _, oh, ow) = max_pool_raw(input.data(), input.height(), input.width(), input.depth());
    FeatureMap::from_raw(oh, ow, input.depth(), out)
}

pub fn global_avg_pool(input: &FeatureMap) -> Vec<f64> {
    let d = input.depth();
    let mut sums = vec![0.0; d];
    for px in input.data().chunks_exact(d) {
        for (s, &v) in sums.iter_mut().zip(px) {
            *s += v;
        }
    }
    let n = (input.height() * input.width()) as f64;
    sums.iter().map(|s| s / n).collect()
}

pub fn relu(input: &FeatureMap) -> FeatureMap {
    let data = input.data().iter().map(|&v| v.max(0.0)).collect();
    FeatureMap::from_raw(input.height(), input.width(), input.depth(), data)
}

/// Stacks feature maps of identical spatial size along the depth axis.
pub fn concat_depth(parts: &[&FeatureMap]) -> Result<FeatureMap> {
    let first = parts
        .first()
        .ok_or_else(|| Error::contract("concatenation of zero feature maps"))?;
    let (h, w) = (first.height(), first.width());
    if parts.iter().any(|p| p.height() != h || p.width() != w) {
        return Err(Error::contract("concatenated maps differ in spatial size"));
    }
    let depths: Vec<usize> = parts.iter().map(|p| p.depth()).collect();
    let data = concat_raw(&parts.iter().map(|p| p.data()).collect::<Vec<_>>(), &depths, h * w);
    Ok(FeatureMap::from_raw(h, w, depths.iter().sum(), data))
}

pub(crate) fn concat_raw(parts: &[&[f64]], depths: &[usize], pixels: usize) -> Vec<f64> {
    let total: usize = depths.iter().sum();
    let mut out = Vec::with_capacity(pixels * total);
    for p in 0..pixels {
        for (data, &d) in parts.iter().zip(depths) {
            out.extend_from_slice(&data[p * d..(p + 1) * d]);
        }
    }
    out
}

/// Numerically stable softmax (max-shifted).
pub fn softmax(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.len() < 2 {
        return Err(Error::contract(format!(
            "softmax needs at least 2 scores, got {}",
            scores.len()
        )));
    }
    if !scores.iter().all(|s| s.is_finite()) {
        return Err(Error::NonFinite("softmax scores"));
    }
    Ok(softmax_raw(scores))
}

pub(crate) fn softmax_raw(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `log Σ exp(s)` computed with the max shift.
pub(crate) fn log_sum_exp(scores: &[f64]) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

/// Flips a map along its horizontal (`x`) and/or vertical (`y`) axis.
pub fn flip(input: &FeatureMap, horizontal: bool, vertical: bool) -> FeatureMap {
    let (h, w) = (input.height(), input.width());
    let mut out = Vec::with_capacity(input.data().len());
    for y in 0..h {
        let sy = if vertical { h - 1 - y } else { y };
        for x in 0..w {
            let sx = if horizontal { w - 1 - x } else { x };
            out.extend_from_slice(input.pixel(sy, sx));
        }
    }
    FeatureMap::from_raw(h, w, input.depth(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(rng: &mut ChaCha8Rng, h: usize, w: usize, d: usize) -> FeatureMap {
        FeatureMap::from_fn(h, w, d, |_, _, _| rng.random_range(-1.0..1.0))
    }

    fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Six nested loops straight from the definition, independent of the
    /// geometry helpers used by the fast kernel.
    fn reference_conv(input: &FeatureMap, kernel: &Tensor, bias: &[f64], spec: &ConvSpec) -> FeatureMap {
        let (h, w) = (input.height() as isize, input.width() as isize);
        let k = spec.kernel_size as isize;
        let dr = spec.dilation as isize;
        let s = spec.stride as isize;
        let extent = (k - 1) * dr + 1;
        let out_h = (h + s - 1) / s;
        let out_w = (w + s - 1) / s;
        let pad_t = (((out_h - 1) * s + extent - h).max(0)) / 2;
        let pad_l = (((out_w - 1) * s + extent - w).max(0)) / 2;
        FeatureMap::from_fn(out_h as usize, out_w as usize, spec.out_depth, |oy, ox, co| {
            let mut acc = bias[co];
            for ky in 0..k {
                for kx in 0..k {
                    let iy = oy as isize * s + ky * dr - pad_t;
                    let ix = ox as isize * s + kx * dr - pad_l;
                    if iy < 0 || ix < 0 || iy >= h || ix >= w {
                        continue;
                    }
                    for ci in 0..spec.in_depth {
                        let widx = ((ky * k + kx) as usize * spec.in_depth + ci) * spec.out_depth + co;
                        acc += input.get(iy as usize, ix as usize, ci) * kernel.data()[widx];
                    }
                }
            }
            acc
        })
    }

    #[test]
    fn scalar_conv() {
        let input = FeatureMap::new(1, 1, 1, vec![5.0]).unwrap();
        let kernel = Tensor::new(vec![1, 1, 1, 1], vec![2.0]).unwrap();
        let out = conv2d(&input, &kernel, &[0.0], &ConvSpec::same(1, 1, 1)).unwrap();
        assert_eq!(out.data(), &[10.0]);
    }

    #[test]
    fn ones_conv_counts_in_bounds_taps() {
        let input = FeatureMap::filled(3, 3, 1, 1.0);
        let kernel = Tensor::new(vec![3, 3, 1, 1], vec![1.0; 9]).unwrap();
        let out = conv2d(&input, &kernel, &[0.0], &ConvSpec::same(3, 1, 1)).unwrap();
        assert_eq!(out.get(1, 1, 0), 9.0);
        for (y, x) in [(0, 0), (0, 2), (2, 0), (2, 2)] {
            assert_eq!(out.get(y, x, 0), 4.0);
        }
        assert_eq!(out.get(0, 1, 0), 6.0);
    }

    #[test]
    fn strided_conv_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let input = random_map(&mut rng, 8, 8, 2);
        for dilation in [1, 2, 4] {
            let spec = ConvSpec::same(3, 2, 3).with_stride(2).with_dilation(dilation);
            let kernel = random_tensor(&mut rng, spec.kernel_shape());
            let bias = vec![0.1, -0.2, 0.3];
            let fast = conv2d(&input, &kernel, &bias, &spec).unwrap();
            let slow = reference_conv(&input, &kernel, &bias, &spec);
            assert_eq!((fast.height(), fast.width()), (4, 4));
            for (a, b) in fast.data().iter().zip(slow.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn valid_padding_shrinks() {
        let input = FeatureMap::filled(5, 6, 1, 1.0);
        let spec = ConvSpec::same(3, 1, 1).with_padding(Padding::Valid);
        let kernel = Tensor::new(vec![3, 3, 1, 1], vec![1.0; 9]).unwrap();
        let out = conv2d(&input, &kernel, &[0.0], &spec).unwrap();
        assert_eq!((out.height(), out.width()), (3, 4));
        assert!(out.data().iter().all(|&v| v == 9.0));
    }

    #[test]
    fn dilated_conv_equals_zero_inflated_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let input = random_map(&mut rng, 11, 9, 2);
        for dilation in [2, 4] {
            let spec = ConvSpec::same(3, 2, 2).with_dilation(dilation);
            let kernel = random_tensor(&mut rng, spec.kernel_shape());
            let ext = spec.effective_extent();
            let mut inflated = Tensor::zeros(vec![ext, ext, 2, 2]);
            for ky in 0..3 {
                for kx in 0..3 {
                    for i in 0..4 {
                        inflated.data_mut()[((ky * dilation) * ext + kx * dilation) * 4 + i] =
                            kernel.data()[(ky * 3 + kx) * 4 + i];
                    }
                }
            }
            let a = conv2d(&input, &kernel, &[0.0, 0.0], &spec).unwrap();
            let big = ConvSpec::same(ext, 2, 2);
            // extent 5 and 9 kernels with dilation 1 are valid odd kernels
            let b = conv2d(&input, &inflated, &[0.0, 0.0], &big).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn conv_rejects_shape_mismatch_and_nan() {
        let input = FeatureMap::filled(4, 4, 2, 1.0);
        let spec = ConvSpec::same(3, 3, 1);
        let kernel = Tensor::zeros(spec.kernel_shape());
        assert!(conv2d(&input, &kernel, &[0.0], &spec).is_err());
        let spec = ConvSpec::same(3, 2, 1);
        assert!(conv2d(&input, &Tensor::zeros(vec![3, 3, 2, 2]), &[0.0], &spec).is_err());
        assert!(conv2d(&input, &Tensor::zeros(spec.kernel_shape()), &[0.0, 0.0], &spec).is_err());
    }

    #[test]
    fn separable_identity_factorisation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let input = random_map(&mut rng, 5, 6, 3);
        let mut delta = Tensor::zeros(vec![3, 3, 3]);
        for c in 0..3 {
            delta.data_mut()[(3 + 1) * 3 + c] = 1.0;
        }
        let mut eye = Tensor::zeros(vec![1, 1, 3, 3]);
        for c in 0..3 {
            eye.data_mut()[c * 3 + c] = 1.0;
        }
        let out = depthwise_separable_conv2d(&input, &delta, &[0.0; 3], &eye, &[0.0; 3]).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn separable_sums_channels() {
        let input = FeatureMap::from_fn(4, 4, 2, |_, _, c| if c == 0 { 0.75 } else { -2.5 });
        let mut delta = Tensor::zeros(vec![3, 3, 2]);
        delta.data_mut()[8] = 1.0;
        delta.data_mut()[9] = 1.0;
        let point = Tensor::new(vec![1, 1, 2, 1], vec![1.0, 1.0]).unwrap();
        let out = depthwise_separable_conv2d(&input, &delta, &[0.0; 2], &point, &[0.0]).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.75 - 2.5));
    }

    #[test]
    fn separable_matches_grouped_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let input = random_map(&mut rng, 7, 6, 3);
        let dw = random_tensor(&mut rng, vec![3, 3, 3]);
        let dwb = vec![0.1, 0.2, -0.3];
        let pw = random_tensor(&mut rng, vec![1, 1, 3, 4]);
        let pwb = vec![0.5, -0.5, 0.25, 0.0];
        // depthwise as a full conv with a channel-diagonal kernel
        let mut grouped = Tensor::zeros(vec![3, 3, 3, 3]);
        for t in 0..9 {
            for c in 0..3 {
                grouped.data_mut()[(t * 3 + c) * 3 + c] = dw.data()[t * 3 + c];
            }
        }
        let mid = conv2d(&input, &grouped, &dwb, &ConvSpec::same(3, 3, 3)).unwrap();
        let oracle = conv2d(&mid, &pw, &pwb, &ConvSpec::same(1, 3, 4)).unwrap();
        let out = depthwise_separable_conv2d(&input, &dw, &dwb, &pw, &pwb).unwrap();
        for (a, b) in out.data().iter().zip(oracle.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn max_pool_cases() {
        let input = FeatureMap::new(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(max_pool2d(&input).data(), &[4.0]);
        let flat = FeatureMap::filled(6, 7, 2, 0.3);
        let pooled = max_pool2d(&flat);
        assert_eq!((pooled.height(), pooled.width()), (3, 4));
        assert!(pooled.data().iter().all(|&v| v == 0.3));
        assert_eq!(max_pool2d(&pooled), FeatureMap::filled(2, 2, 2, 0.3));
    }

    #[test]
    fn max_pool_odd_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let input = random_map(&mut rng, 5, 5, 2);
        let out = max_pool2d(&input);
        assert_eq!((out.height(), out.width()), (3, 3));
        for oy in 0..3 {
            for ox in 0..3 {
                for c in 0..2 {
                    let mut m = f64::NEG_INFINITY;
                    for y in 2 * oy..(2 * oy + 2).min(5) {
                        for x in 2 * ox..(2 * ox + 2).min(5) {
                            m = m.max(input.get(y, x, c));
                        }
                    }
                    assert_eq!(out.get(oy, ox, c), m);
                }
            }
        }
    }

    #[test]
    fn global_average() {
        let v = FeatureMap::new(1, 1, 3, vec![1.0, -2.0, 3.0]).unwrap();
        assert_eq!(global_avg_pool(&v), vec![1.0, -2.0, 3.0]);
        assert_eq!(global_avg_pool(&FeatureMap::filled(3, 4, 2, 1.5)), vec![1.5, 1.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_map(&mut rng, 7, 5, 3);
        let gap = global_avg_pool(&m);
        for (c, g) in gap.iter().enumerate() {
            let mut s = 0.0;
            for y in 0..7 {
                for x in 0..5 {
                    s += m.get(y, x, c);
                }
            }
            assert!((g - s / 35.0).abs() < 1e-12);
        }
    }

    #[test]
    fn relu_values() {
        let m = FeatureMap::new(1, 3, 1, vec![-1.0, 0.0, 3.5]).unwrap();
        assert_eq!(relu(&m).data(), &[0.0, 0.0, 3.5]);
    }

    #[test]
    fn softmax_values() {
        let u = softmax(&[0.0; 9]).unwrap();
        assert!(u.iter().all(|p| (p - 1.0 / 9.0).abs() < 1e-15));
        let p = softmax(&[2f64.ln(), 0.0]).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(softmax(&[1000.0, 1000.0]).unwrap(), vec![0.5, 0.5]);
        assert!(softmax(&[1.0]).is_err());
        assert!(softmax(&[1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn flips_compose() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_map(&mut rng, 4, 3, 2);
        assert_eq!(flip(&flip(&m, true, false), true, false), m);
        assert_eq!(flip(&flip(&m, true, false), false, true), flip(&m, true, true));
    }

    #[test]
    fn symmetric_stride1_primitives_commute_with_flips() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let input = random_map(&mut rng, 9, 8, 2);
        let spec = ConvSpec::same(3, 2, 3).with_dilation(2);
        let mut kernel = random_tensor(&mut rng, spec.kernel_shape());
        // mirror-symmetric in both spatial axes
        let per_tap = 6;
        for ky in 0..3 {
            for kx in 0..3 {
                for i in 0..per_tap {
                    let src = ((ky.min(2 - ky)) * 3 + kx.min(2 - kx)) * per_tap + i;
                    let v = kernel.data()[src];
                    kernel.data_mut()[(ky * 3 + kx) * per_tap + i] = v;
                }
            }
        }
        let bias = [0.1, 0.0, -0.1];
        for (h, v) in [(true, false), (false, true), (true, true)] {
            let a = conv2d(&flip(&input, h, v), &kernel, &bias, &spec).unwrap();
            let b = flip(&conv2d(&input, &kernel, &bias, &spec).unwrap(), h, v);
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() < 1e-12);
            }
            let ga = global_avg_pool(&relu(&a));
            let gb = global_avg_pool(&relu(&b));
            for (x, y) in ga.iter().zip(&gb) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn primitives_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let input = random_map(&mut rng, 6, 6, 2);
        let spec = ConvSpec::same(3, 2, 2).with_stride(2);
        let k = random_tensor(&mut rng, spec.kernel_shape());
        let a = conv2d(&input, &k, &[0.0, 1.0], &spec).unwrap();
        let b = conv2d(&input, &k, &[0.0, 1.0], &spec).unwrap();
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
