//! Perspective rectification and ground-sampling-distance resampling.

use crate::error::{Error, Result};
use crate::tensor::FeatureMap;

use super::homography::Homography;

/// A nadir-view image with a constant scale.
#[derive(Debug, Clone, PartialEq)]
pub struct RectifiedImage {
    image: FeatureMap,
    gsd: f64,
}

impl RectifiedImage {
    /// `gsd` is in px/mm. Values must lie in `[0, 1]`.
    pub fn new(image: FeatureMap, gsd: f64) -> Result<Self> {
        if !(gsd.is_finite() && gsd > 0.0) {
            return Err(Error::contract(format!("gsd must be positive, got {gsd}")));
        }
        if let Some(v) = image.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::contract(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self { image, gsd })
    }

    pub fn image(&self) -> &FeatureMap {
        &self.image
    }

    pub fn into_image(self) -> FeatureMap {
        self.image
    }

    pub fn gsd(&self) -> f64 {
        self.gsd
    }

    /// `(width_mm, height_mm)` covered by the image.
    pub fn extent_mm(&self) -> (f64, f64) {
        (
            self.image.width() as f64 / self.gsd,
            self.image.height() as f64 / self.gsd,
        )
    }
}

/// Output of [`warp_rectify`].
#[derive(Debug, Clone, PartialEq)]
pub struct Rectification {
    pub image: RectifiedImage,
    /// Row-major, one flag per output pixel: whether it came from inside the
    /// source image.
    pub valid: Vec<bool>,
}

impl Rectification {
    pub fn valid_fraction(&self) -> f64 {
        self.valid.iter().filter(|&&v| v).count() as f64 / self.valid.len() as f64
    }
}

/// Bilinear sample at continuous pixel-centre coordinates `(fx, fy)`
/// (pixel `(0, 0)` has its centre at `(0, 0)`), clamped to the border.
fn bilinear(src: &FeatureMap, fx: f64, fy: f64, out: &mut [f64]) {
    let (h, w) = (src.height(), src.width());
    let fx = fx.clamp(0.0, (w - 1) as f64);
    let fy = fy.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
    for (c, o) in out.iter_mut().enumerate() {
        let a = src.get(y0, x0, c);
        let b = src.get(y0, x1, c);
        let top = a + tx * (b - a);
        let a = src.get(y1, x0, c);
        let b = src.get(y1, x1, c);
        let bottom = a + tx * (b - a);
        *o = top + ty * (bottom - top);
    }
}

/// Resamples `image` onto the object plane at `target_gsd` px/mm.
///
/// `h` maps object-plane mm to source pixels, where pixel `(row, col)` covers
/// `[col, col + 1) × [row, row + 1)`. Each output pixel centre is mapped
/// through `h` and sampled bilinearly; pixels falling outside the source are
/// set to 0 and flagged invalid.
pub fn warp_rectify(
    image: &FeatureMap,
    h: &Homography,
    target_gsd: f64,
    extent_mm: (f64, f64),
) -> Result<Rectification> {
    if !(target_gsd.is_finite() && target_gsd > 0.0) {
        return Err(Error::contract(format!(
            "target gsd must be positive, got {target_gsd}"
        )));
    }
    h.inverse()?;
    let (ew, eh) = extent_mm;
    let out_w = (ew * target_gsd).round();
    let out_h = (eh * target_gsd).round();
    if !(out_w >= 1.0 && out_h >= 1.0) {
        return Err(Error::contract(format!(
            "extent {ew}×{eh} mm at {target_gsd} px/mm is empty"
        )));
    }
    let (out_w, out_h) = (out_w as usize, out_h as usize);
    let (sw, sh, d) = (image.width() as f64, image.height() as f64, image.depth());
    let mut data = vec![0.0; out_h * out_w * d];
    let mut valid = vec![false; out_h * out_w];
    for r in 0..out_h {
        for c in 0..out_w {
            let x = (c as f64 + 0.5) / target_gsd;
            let y = (r as f64 + 0.5) / target_gsd;
            let Some((u, v)) = h.apply(x, y) else { continue };
            if !(u >= 0.0 && u <= sw && v >= 0.0 && v <= sh) {
                continue;
            }
            let i = r * out_w + c;
            valid[i] = true;
            bilinear(image, u - 0.5, v - 0.5, &mut data[i * d..(i + 1) * d]);
        }
    }
    let map = FeatureMap::new(out_h, out_w, d, data)?;
    Ok(Rectification {
        image: RectifiedImage::new(map, target_gsd)?,
        valid,
    })
}

/// Per-axis resampling weights: for each output index, `(source index,
/// weight)` pairs. Downsampling integrates the source over the output pixel's
/// footprint; upsampling interpolates linearly between pixel centres.
fn axis_weights(src: usize, dst: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            if dst < src {
                let (lo, hi) = (o as f64 * scale, (o + 1) as f64 * scale);
                let first = lo.floor() as usize;
                let last = (hi.ceil() as usize).min(src);
                (first..last)
                    .filter_map(|i| {
                        let w = hi.min((i + 1) as f64) - lo.max(i as f64);
                        (w > 0.0).then_some((i, w))
                    })
                    .collect()
            } else {
                let f = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
                let i0 = f.floor() as usize;
                let i1 = (i0 + 1).min(src - 1);
                let t = f - i0 as f64;
                if t == 0.0 || i0 == i1 {
                    vec![(i0, 1.0)]
                } else {
                    vec![(i0, 1.0 - t), (i1, t)]
                }
            }
        })
        .collect()
}

/// Weighted mean written as an offset from the first value, so a run of equal
/// values reproduces that value exactly.
fn weighted_mean(values: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut base = None;
    let (mut acc, mut total) = (0.0, 0.0);
    for (v, w) in values {
        let b = *base.get_or_insert(v);
        acc += w * (v - b);
        total += w;
    }
    base.unwrap_or(0.0) + acc / total
}

/// Changes the scale to `dst_gsd` px/mm, keeping the covered extent.
///
/// The new size is `round(extent · dst_gsd)` per axis. Axes that shrink are
/// area-averaged (no aliasing of fine grains); axes that grow are
/// interpolated bilinearly.
pub fn resample_gsd(image: &RectifiedImage, dst_gsd: f64) -> Result<RectifiedImage> {
    if !(dst_gsd.is_finite() && dst_gsd > 0.0) {
        return Err(Error::contract(format!("gsd must be positive, got {dst_gsd}")));
    }
    let src = image.image();
    let (ew, eh) = image.extent_mm();
    let out_w = ((ew * dst_gsd).round() as usize).max(1);
    let out_h = ((eh * dst_gsd).round() as usize).max(1);
    if out_w == src.width() && out_h == src.height() {
        return RectifiedImage::new(src.clone(), dst_gsd);
    }
    let d = src.depth();
    let wx = axis_weights(src.width(), out_w);
    let wy = axis_weights(src.height(), out_h);

    // Rows first, then columns.
    let mut tmp = vec![0.0; out_h * src.width() * d];
    for (r, taps) in wy.iter().enumerate() {
        for x in 0..src.width() {
            for c in 0..d {
                tmp[(r * src.width() + x) * d + c] = weighted_mean(taps.iter().map(|&(y, w)| (src.get(y, x, c), w)));
            }
        }
    }
    let mut out = vec![0.0; out_h * out_w * d];
    for r in 0..out_h {
        for (col, taps) in wx.iter().enumerate() {
            for c in 0..d {
                out[(r * out_w + col) * d + c] =
                    weighted_mean(taps.iter().map(|&(x, w)| (tmp[(r * src.width() + x) * d + c], w))).clamp(0.0, 1.0);
            }
        }
    }
    RectifiedImage::new(FeatureMap::new(out_h, out_w, d, out)?, dst_gsd)
}
