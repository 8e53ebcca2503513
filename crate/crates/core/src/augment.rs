//! Training-time augmentation: random flips, the radiometric transform
//! `(clamp(I·α + β))^γ` and a hue rotation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops;
use crate::tensor::FeatureMap;

/// One concrete augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    /// Contrast factor, > 0.
    pub alpha: f64,
    /// Brightness offset.
    pub beta: f64,
    /// Gamma exponent, > 0.
    pub gamma: f64,
    /// Hue offset in degrees.
    pub tau_deg: f64,
    pub flip_h: bool,
    pub flip_v: bool,
}

impl AugmentParams {
    pub const IDENTITY: Self = Self {
        alpha: 1.0,
        beta: 0.0,
        gamma: 1.0,
        tau_deg: 0.0,
        flip_h: false,
        flip_v: false,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::contract(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::contract(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !self.beta.is_finite() || !self.tau_deg.is_finite() {
            return Err(Error::NonFinite("augmentation parameters"));
        }
        Ok(())
    }
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Sampling intervals `[lo, hi]` and flip probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentRanges {
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub gamma: [f64; 2],
    pub tau_deg: [f64; 2],
    pub flip_h_prob: f64,
    pub flip_v_prob: f64,
}

impl Default for AugmentRanges {
    fn default() -> Self {
        Self {
            alpha: [0.8, 1.25],
            beta: [-0.1, 0.1],
            gamma: [0.8, 1.25],
            tau_deg: [-18.0, 18.0],
            flip_h_prob: 0.5,
            flip_v_prob: 0.5,
        }
    }
}

impl AugmentRanges {
    /// Ranges that only ever produce [`AugmentParams::IDENTITY`].
    pub fn identity() -> Self {
        Self {
            alpha: [1.0, 1.0],
            beta: [0.0, 0.0],
            gamma: [1.0, 1.0],
            tau_deg: [0.0, 0.0],
            flip_h_prob: 0.0,
            flip_v_prob: 0.0,
        }
    }

    /// Each interval must be ordered and contain the identity value.
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, [lo, hi]: [f64; 2], identity: f64| {
            if !(lo.is_finite() && hi.is_finite() && lo <= identity && identity <= hi) {
                return Err(Error::Config(format!(
                    "augmentation range {name} = [{lo}, {hi}] must be ordered and contain {identity}"
                )));
            }
            Ok(())
        };
        check("alpha", self.alpha, 1.0)?;
        check("beta", self.beta, 0.0)?;
        check("gamma", self.gamma, 1.0)?;
        check("tau_deg", self.tau_deg, 0.0)?;
        if self.alpha[0] <= 0.0 || self.gamma[0] <= 0.0 {
            return Err(Error::Config("alpha and gamma ranges must stay positive".into()));
        }
        for (name, p) in [("flip_h_prob", self.flip_h_prob), ("flip_v_prob", self.flip_v_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is not a probability")));
            }
        }
        Ok(())
    }
}

/// Per-channel `(clamp₀¹(I·α + β))^γ`, clamped to `[0, 1]`.
pub fn radiometric(image: &FeatureMap, alpha: f64, beta: f64, gamma: f64) -> Result<FeatureMap> {
    AugmentParams {
        alpha,
        beta,
        gamma,
        ..AugmentParams::IDENTITY
    }
    .validate()?;
    let mut out = image.clone();
    for v in out.data_mut() {
        *v = (*v * alpha + beta).clamp(0.0, 1.0).powf(gamma).clamp(0.0, 1.0);
    }
    Ok(out)
}

/// Rotates hue by `tau_deg` in the hexcone hue/saturation/value model.
///
/// The value channel (the largest of r, g, b) is preserved exactly; grey
/// pixels are left untouched.
pub fn hue_shift(image: &FeatureMap, tau_deg: f64) -> Result<FeatureMap> {
    if image.depth() != 3 {
        return Err(Error::contract(format!(
            "hue shift needs 3 channels, got {}",
            image.depth()
        )));
    }
    if !tau_deg.is_finite() {
        return Err(Error::NonFinite("hue offset"));
    }
    let mut out = image.clone();
    for px in out.data_mut().chunks_exact_mut(3) {
        let (r, g, b) = (px[0], px[1], px[2]);
        let max = r.max(g).max(b);
        let min = r.min(g).min(b);
        let chroma = max - min;
        if chroma == 0.0 {
            continue;
        }
        let sector = if max == r {
            ((g - b) / chroma).rem_euclid(6.0)
        } else if max == g {
            (b - r) / chroma + 2.0
        } else {
            (r - g) / chroma + 4.0
        };
        let hue = (sector * 60.0 + tau_deg).rem_euclid(360.0);
        let h6 = hue / 60.0;
        let frac = 1.0 - (h6.rem_euclid(2.0) - 1.0).abs();
        let mid = (min + chroma * frac).clamp(min, max);
        let (nr, ng, nb) = match h6 as u32 {
            0 => (max, mid, min),
            1 => (mid, max, min),
            2 => (min, max, mid),
            3 => (min, mid, max),
            4 => (mid, min, max),
            _ => (max, min, mid),
        };
        px.copy_from_slice(&[nr, ng, nb]);
    }
    Ok(out)
}

/// Horizontal (left-right) and/or vertical (top-bottom) mirroring.
pub fn flips(image: &FeatureMap, flip_h: bool, flip_v: bool) -> FeatureMap {
    ops::flip(image, flip_h, flip_v)
}

fn uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}

/// Draws one augmentation uniformly from `ranges`.
///
/// Always consumes the same number of random values, so streams stay aligned
/// whatever the ranges are.
pub fn sample_augmentation(ranges: &AugmentRanges, rng: &mut impl Rng) -> AugmentParams {
    let alpha = uniform(rng, ranges.alpha);
    let beta = uniform(rng, ranges.beta);
    let gamma = uniform(rng, ranges.gamma);
    let tau_deg = uniform(rng, ranges.tau_deg);
    let flip_h = rng.random::<f64>() < ranges.flip_h_prob;
    let flip_v = rng.random::<f64>() < ranges.flip_v_prob;
    AugmentParams {
        alpha,
        beta,
        gamma,
        tau_deg,
        flip_h,
        flip_v,
    }
}

/// Flips, then the radiometric transform, then the hue rotation (3-channel
/// images only; skipped when `tau_deg` is zero).
pub fn apply(image: &FeatureMap, p: &AugmentParams) -> Result<FeatureMap> {
    p.validate()?;
    let flipped = flips(image, p.flip_h, p.flip_v);
    let mut out = if (p.alpha, p.beta, p.gamma) == (1.0, 0.0, 1.0) {
        flipped
    } else {
        radiometric(&flipped, p.alpha, p.beta, p.gamma)?
    };
    if p.tau_deg != 0.0 && out.depth() == 3 {
        out = hue_shift(&out, p.tau_deg)?;
    }
    Ok(out)
}
