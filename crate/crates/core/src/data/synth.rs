//! Procedural aggregate images with a known grading curve.
//!
//! Mass fractions are turned into particle counts with a sphere model
//! (count ∝ mass / d³). Particles are convex polygons inscribed in randomly
//! oriented ellipses, placed by dart throwing with bounded overlap and drawn
//! with albedo, shading and texture jitter over a noisy background.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::RectifiedImage;
use crate::model::{ClassSet, GradingCurveLabel};
use crate::tensor::FeatureMap;

use super::classspec::{ClassSpec, SIEVE_BINS_MM};
use super::dataset::{LabeledSample, SampleSet};

/// Generator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    /// px/mm.
    pub gsd: f64,
    /// `(width, height)` in mm.
    pub extent_mm: (f64, f64),
    /// Requested fraction of the field covered by particles, at most 0.9.
    pub coverage: f64,
    /// Allowed overlap as a fraction of the summed radii of two particles.
    pub max_overlap: f64,
    /// Smallest particle drawn for the finest bin, mm.
    pub min_diameter_mm: f64,
    pub sample_set: SampleSet,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            gsd: 2.0,
            extent_mm: (64.0, 64.0),
            coverage: 0.6,
            max_overlap: 0.25,
            min_diameter_mm: 0.5,
            sample_set: SampleSet::S1,
        }
    }
}

impl SynthParams {
    pub fn size_px(&self) -> (usize, usize) {
        (
            (self.extent_mm.1 * self.gsd).round() as usize,
            (self.extent_mm.0 * self.gsd).round() as usize,
        )
    }

    fn validate(&self) -> Result<()> {
        if !(self.gsd.is_finite() && self.gsd > 0.0) {
            return Err(Error::contract(format!("gsd must be positive, got {}", self.gsd)));
        }
        let (h, w) = self.size_px();
        if h == 0 || w == 0 {
            return Err(Error::contract("synthetic field is empty"));
        }
        if !(self.coverage > 0.0 && self.coverage <= 0.9) {
            return Err(Error::contract(format!(
                "requested area fraction {} is infeasible (must be in (0, 0.9])",
                self.coverage
            )));
        }
        if !(0.0..1.0).contains(&self.max_overlap) {
            return Err(Error::contract("max_overlap must be in [0, 1)"));
        }
        if !(self.min_diameter_mm > 0.0 && self.min_diameter_mm < SIEVE_BINS_MM[0].1) {
            return Err(Error::contract("min_diameter_mm must lie inside the finest bin"));
        }
        Ok(())
    }

    fn bin_range(&self, bin: usize) -> (f64, f64) {
        let (lo, hi) = SIEVE_BINS_MM[bin];
        (lo.max(self.min_diameter_mm), hi)
    }
}

/// One rendered particle.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub bin: usize,
    pub diameter_mm: f64,
    pub center_px: (f64, f64),
    /// Polygon vertices `(x, y)` in px, counter-clockwise.
    pub vertices_px: Vec<(f64, f64)>,
}

impl Particle {
    /// Polygon area in px².
    pub fn area_px(&self) -> f64 {
        let v = &self.vertices_px;
        let mut s = 0.0;
        for i in 0..v.len() {
            let (a, b) = (v[i], v[(i + 1) % v.len()]);
            s += a.0 * b.1 - b.0 * a.1;
        }
        s.abs() / 2.0
    }

    /// Largest vertex-to-vertex distance, px.
    pub fn feret_px(&self) -> f64 {
        let v = &self.vertices_px;
        let mut best: f64 = 0.0;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                best = best.max((v[i].0 - v[j].0).hypot(v[i].1 - v[j].1));
            }
        }
        best
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        let v = &self.vertices_px;
        (0..v.len()).all(|i| {
            let (a, b) = (v[i], v[(i + 1) % v.len()]);
            (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0) >= 0.0
        })
    }
}

/// A generated image with its ground-truth particle list.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthImage {
    pub sample: LabeledSample,
    pub particles: Vec<Particle>,
    /// Particles that found no free spot.
    pub dropped: usize,
}

impl SynthImage {
    /// Total polygon area per sieve bin, px².
    pub fn area_per_bin(&self) -> [f64; 4] {
        let mut out = [0.0; 4];
        for p in &self.particles {
            out[p.bin] += p.area_px();
        }
        out
    }
}

/// `E[d^k]` for `d` uniform on `[lo, hi]`.
fn uniform_moment(lo: f64, hi: f64, k: i32) -> f64 {
    if hi - lo < 1e-12 {
        return lo.powi(k);
    }
    (hi.powi(k + 1) - lo.powi(k + 1)) / ((k + 1) as f64 * (hi - lo))
}

fn stochastic_round(x: f64, rng: &mut impl Rng) -> usize {
    let base = x.floor();
    base as usize + usize::from(rng.random::<f64>() < x - base)
}

/// Uniform grid over the image storing which particles touch each cell.
struct Occupancy {
    cell: f64,
    cols: usize,
    rows: usize,
    cells: Vec<Vec<usize>>,
}

impl Occupancy {
    fn new(w: f64, h: f64, cell: f64) -> Self {
        let cols = (w / cell).ceil().max(1.0) as usize;
        let rows = (h / cell).ceil().max(1.0) as usize;
        Self {
            cell,
            cols,
            rows,
            cells: vec![Vec::new(); cols * rows],
        }
    }

    fn span(&self, x: f64, y: f64, r: f64) -> impl Iterator<Item = usize> + '_ {
        let clamp = |v: f64, n: usize| (v / self.cell).floor().clamp(0.0, (n - 1) as f64) as usize;
        let (x0, x1) = (clamp(x - r, self.cols), clamp(x + r, self.cols));
        let (y0, y1) = (clamp(y - r, self.rows), clamp(y + r, self.rows));
        (y0..=y1).flat_map(move |cy| (x0..=x1).map(move |cx| cy * self.cols + cx))
    }
}

/// Renders one image of class `label` following `spec`.
pub fn synth_sample(
    spec: &ClassSpec,
    label: GradingCurveLabel,
    params: &SynthParams,
    source_id: impl Into<String>,
    rng: &mut impl Rng,
) -> Result<SynthImage> {
    params.validate()?;
    let (h, w) = params.size_px();
    let g = params.gsd;
    let field_mm2 = params.extent_mm.0 * params.extent_mm.1;

    // Expected counts from the sphere model, scaled to the requested coverage.
    let per_mass_area: f64 = (0..4)
        .map(|b| {
            let (lo, hi) = params.bin_range(b);
            spec.fractions[b] * std::f64::consts::FRAC_PI_4 * uniform_moment(lo, hi, 2) / uniform_moment(lo, hi, 3)
        })
        .sum();
    let k = params.coverage * field_mm2 / per_mass_area;
    let mut diameters = Vec::new();
    for b in 0..4 {
        let (lo, hi) = params.bin_range(b);
        let n = stochastic_round(k * spec.fractions[b] / uniform_moment(lo, hi, 3), rng);
        for _ in 0..n {
            diameters.push((b, lo + (hi - lo) * rng.random::<f64>()));
        }
    }
    diameters.sort_by(|a, b| b.1.total_cmp(&a.1));

    let (wf, hf) = (w as f64, h as f64);
    let mut grid = Occupancy::new(wf, hf, (4.0 * g).max(4.0));
    let mut placed: Vec<(f64, f64, f64)> = Vec::new();
    let mut particles = Vec::new();
    let mut dropped = 0;
    for (bin, d) in diameters {
        let r = d * g / 2.0;
        let mut spot = None;
        for _ in 0..30 {
            let (x, y) = (rng.random::<f64>() * wf, rng.random::<f64>() * hf);
            let free = grid.span(x, y, r).all(|c| {
                grid.cells[c].iter().all(|&j| {
                    let (px, py, pr) = placed[j];
                    (x - px).hypot(y - py) >= (r + pr) * (1.0 - params.max_overlap)
                })
            });
            if free {
                spot = Some((x, y));
                break;
            }
        }
        let Some((x, y)) = spot else {
            dropped += 1;
            continue;
        };
        let id = placed.len();
        placed.push((x, y, r));
        let cells: Vec<usize> = grid.span(x, y, r).collect();
        for c in cells {
            grid.cells[c].push(id);
        }
        let n = rng.random_range(5..=9);
        let aspect = 0.7 + 0.3 * rng.random::<f64>();
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        let step = std::f64::consts::TAU / n as f64;
        let vertices_px = (0..n)
            .map(|i| {
                let t = step * (i as f64 + 0.3 * (rng.random::<f64>() - 0.5));
                let (ex, ey) = (r * t.cos(), r * aspect * t.sin());
                (
                    x + ex * theta.cos() - ey * theta.sin(),
                    y + ex * theta.sin() + ey * theta.cos(),
                )
            })
            .collect();
        particles.push(Particle {
            bin,
            diameter_mm: d,
            center_px: (x, y),
            vertices_px,
        });
    }

    let image = render(&particles, h, w, rng);
    Ok(SynthImage {
        sample: LabeledSample {
            image: RectifiedImage::new(image, g)?,
            label,
            sample_set: params.sample_set,
            source_id: source_id.into(),
        },
        particles,
        dropped,
    })
}

fn render(particles: &[Particle], h: usize, w: usize, rng: &mut impl Rng) -> FeatureMap {
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let base = 0.3 + 0.1 * rng.random::<f64>();
    let tint: [f64; 3] = std::array::from_fn(|_| 0.04 * (rng.random::<f64>() - 0.5));
    let mut data = Vec::with_capacity(h * w * 3);
    for _ in 0..h * w {
        let n = 0.03 * noise.sample(rng);
        data.extend(tint.iter().map(|t| base + t + n));
    }
    let light = (-std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2);
    const SUB: [f64; 2] = [0.25, 0.75];
    for p in particles {
        let albedo = 0.35 + 0.5 * rng.random::<f64>();
        let col: [f64; 3] = std::array::from_fn(|_| albedo * (1.0 + 0.1 * (rng.random::<f64>() - 0.5)));
        let radius_px = p
            .vertices_px
            .iter()
            .map(|v| (v.0 - p.center_px.0).hypot(v.1 - p.center_px.1))
            .fold(1e-9, f64::max);
        let (xs, ys): (Vec<f64>, Vec<f64>) = p.vertices_px.iter().copied().unzip();
        let x0 = xs.iter().copied().fold(f64::MAX, f64::min).floor().max(0.0) as usize;
        let y0 = ys.iter().copied().fold(f64::MAX, f64::min).floor().max(0.0) as usize;
        let x1 = (xs.iter().copied().fold(f64::MIN, f64::max).ceil() as usize).min(w);
        let y1 = (ys.iter().copied().fold(f64::MIN, f64::max).ceil() as usize).min(h);
        for py in y0..y1 {
            for px in x0..x1 {
                let mut hits = 0;
                for sy in SUB {
                    for sx in SUB {
                        hits += usize::from(p.contains(px as f64 + sx, py as f64 + sy));
                    }
                }
                if hits == 0 {
                    continue;
                }
                let alpha = hits as f64 / 4.0;
                let (dx, dy) = (
                    (px as f64 + 0.5 - p.center_px.0) / radius_px,
                    (py as f64 + 0.5 - p.center_px.1) / radius_px,
                );
                let shade = 1.0 + 0.25 * (dx * light.0 + dy * light.1);
                let tex = 1.0 + 0.08 * noise.sample(rng);
                let i = (py * w + px) * 3;
                for c in 0..3 {
                    let v = col[c] * shade * tex;
                    data[i + c] = data[i + c] * (1.0 - alpha) + v * alpha;
                }
            }
        }
    }
    for v in &mut data {
        *v = v.clamp(0.0, 1.0);
    }
    FeatureMap::new(h, w, 3, data).expect("finite by construction")
}

/// `per_class` images for each spec, classes labelled in spec order.
///
/// Every image gets its own generator seeded from `seed`, the class index and
/// the image index, so subsets are reproducible independently.
pub fn synth_dataset(
    specs: &[ClassSpec],
    per_class: usize,
    params: &SynthParams,
    seed: u64,
) -> Result<(ClassSet, Vec<LabeledSample>)> {
    let classes = ClassSet::new(specs.iter().map(|s| s.name.clone()))?;
    let mut out = Vec::with_capacity(specs.len() * per_class);
    for (c, spec) in specs.iter().enumerate() {
        for i in 0..per_class {
            let sub = seed
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .wrapping_add(((c as u64) << 32) ^ i as u64 ^ ((params.sample_set as u64) << 63));
            let mut rng = ChaCha8Rng::seed_from_u64(sub);
            let id = format!("synth-{seed:x}-{}-{:?}-{i:04}", spec.name, params.sample_set);
            out.push(synth_sample(spec, GradingCurveLabel::new(c), params, id, &mut rng)?.sample);
        }
    }
    Ok((classes, out))
}
