//! Labelled samples, manifest-driven loading and the S1/S2 split protocol.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{resample_gsd, RectifiedImage};
use crate::model::{ClassSet, GradingCurveLabel};

use super::png::{read_png, write_png};

/// Physically distinct aggregate sample a photograph was taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SampleSet {
    S1,
    S2,
}

impl std::str::FromStr for SampleSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "S1" | "s1" => Ok(SampleSet::S1),
            "S2" | "s2" => Ok(SampleSet::S2),
            other => Err(Error::Data(format!("unknown sample set `{other}` (expected S1 or S2)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub image: RectifiedImage,
    pub label: GradingCurveLabel,
    pub sample_set: SampleSet,
    pub source_id: String,
}

/// Counts per class and sample set, plus non-fatal findings.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct DatasetReport {
    pub total: usize,
    /// Class name → `[S1 count, S2 count]`.
    pub per_class: BTreeMap<String, [usize; 2]>,
    pub balanced: bool,
    pub warnings: Vec<String>,
}

impl DatasetReport {
    pub fn of(samples: &[LabeledSample], classes: &ClassSet) -> Self {
        let mut per_class: BTreeMap<String, [usize; 2]> = classes.names().iter().map(|n| (n.clone(), [0, 0])).collect();
        for s in samples {
            let slot = per_class.entry(classes.name(s.label).to_string()).or_default();
            slot[s.sample_set as usize] += 1;
        }
        let first = per_class.values().next().copied();
        let balanced = per_class.values().all(|c| Some(*c) == first);
        let mut warnings = Vec::new();
        if samples.is_empty() {
            warnings.push("dataset is empty".to_string());
        }
        Self {
            total: samples.len(),
            per_class,
            balanced,
            warnings,
        }
    }
}

/// One `manifest.csv` row; `path` is relative to the dataset root and doubles
/// as the sample's source id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub class: String,
    pub sample_set: String,
    pub gsd_px_per_mm: f64,
}

fn parse_manifest(text: &str) -> Vec<(usize, std::result::Result<ManifestEntry, String>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    reader
        .deserialize::<ManifestEntry>()
        .enumerate()
        .map(|(i, r)| (i + 2, r.map_err(|e| e.to_string())))
        .collect()
}

/// Reads `root/manifest.csv` without loading any image.
pub fn read_manifest(root: &Path) -> Result<Vec<ManifestEntry>> {
    let manifest = root.join("manifest.csv");
    let text = std::fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for (line, row) in parse_manifest(&text) {
        match row {
            Ok(r) => rows.push(r),
            Err(e) => errors.push(format!("manifest line {line}: {e}")),
        }
    }
    if errors.is_empty() {
        Ok(rows)
    } else {
        Err(Error::Dataset(errors))
    }
}

/// Writes every sample as an 8-bit PNG under `root` at its source id and a
/// matching `manifest.csv`, so [`load_dataset`] reads the set back.
pub fn write_dataset(root: &Path, samples: &[LabeledSample], classes: &ClassSet) -> Result<()> {
    let mut rows = Vec::with_capacity(samples.len());
    for s in samples {
        let rel = Path::new(&s.source_id);
        if rel.is_absolute() || rel.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
            return Err(Error::Data(format!(
                "source id `{}` is not a relative path",
                s.source_id
            )));
        }
        let path = root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        write_png(&path, s.image.image(), false)?;
        rows.push(ManifestEntry {
            path: s.source_id.clone(),
            class: classes.name(s.label).to_string(),
            sample_set: format!("{:?}", s.sample_set),
            gsd_px_per_mm: s.image.gsd(),
        });
    }
    let manifest = root.join("manifest.csv");
    let mut w = csv::Writer::from_path(&manifest).map_err(|e| Error::Data(format!("{}: {e}", manifest.display())))?;
    for r in &rows {
        w.serialize(r).map_err(|e| Error::Data(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(&manifest, e))
}

/// Options for [`load_dataset`].
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub classes: ClassSet,
    /// Resample every image to this GSD while loading.
    pub target_gsd: Option<f64>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            classes: ClassSet::canonical(),
            target_gsd: None,
        }
    }
}

/// Loads `root/manifest.csv` (`path,class,sample_set,gsd_px_per_mm`) and every
/// image it lists, in manifest order.
///
/// All bad rows and unreadable images are collected into one
/// [`Error::Dataset`] rather than stopping at the first.
pub fn load_dataset(root: &Path, opts: &LoadOptions) -> Result<(Vec<LabeledSample>, DatasetReport)> {
    let manifest = root.join("manifest.csv");
    let text = std::fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
    let mut samples = Vec::new();
    let mut errors = Vec::new();
    for (line, row) in parse_manifest(&text) {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                errors.push(format!("manifest line {line}: {e}"));
                continue;
            }
        };
        match load_row(root, &row, opts) {
            Ok(s) => samples.push(s),
            Err(e) => errors.push(format!("manifest line {line} ({}): {e}", row.path)),
        }
    }
    if !errors.is_empty() {
        return Err(Error::Dataset(errors));
    }
    let report = DatasetReport::of(&samples, &opts.classes);
    Ok((samples, report))
}

fn load_row(root: &Path, row: &ManifestEntry, opts: &LoadOptions) -> Result<LabeledSample> {
    let label = opts
        .classes
        .label(&row.class)
        .ok_or_else(|| Error::Data(format!("unknown class `{}`", row.class)))?;
    let sample_set: SampleSet = row.sample_set.parse()?;
    if !(row.gsd_px_per_mm.is_finite() && row.gsd_px_per_mm > 0.0) {
        return Err(Error::Data(format!("invalid gsd {}", row.gsd_px_per_mm)));
    }
    let path: PathBuf = root.join(&row.path);
    let mut image = RectifiedImage::new(read_png(&path)?, row.gsd_px_per_mm)?;
    if let Some(g) = opts.target_gsd {
        image = resample_gsd(&image, g)?;
    }
    Ok(LabeledSample {
        image,
        label,
        sample_set,
        source_id: row.path.clone(),
    })
}

/// Train/validation/test indices into a sample list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitProtocol {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Validation images per class for `n` S1 images: `round(n · 6 / 50)`.
pub fn validation_count(n: usize) -> usize {
    ((n * 6) as f64 / 50.0).round() as usize
}

/// S1 images become training and validation data (44:6 per class, the
/// validation images chosen by a seeded shuffle); S2 images become test data.
///
/// With `strict` set, every class needs at least 50 S1 images.
pub fn make_splits(samples: &[LabeledSample], class_count: usize, seed: u64, strict: bool) -> Result<SplitProtocol> {
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); class_count];
    let mut test = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        if s.label.index() >= class_count {
            return Err(Error::Data(format!(
                "sample {} has label {} outside {class_count} classes",
                s.source_id, s.label
            )));
        }
        match s.sample_set {
            SampleSet::S1 => per_class[s.label.index()].push(i),
            SampleSet::S2 => test.push(i),
        }
    }
    if strict {
        if let Some((c, v)) = per_class.iter().enumerate().find(|(_, v)| v.len() < 50) {
            return Err(Error::Data(format!(
                "class index {c} has {} S1 images; strict splitting needs 50",
                v.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for mut idx in per_class {
        idx.shuffle(&mut rng);
        let n_val = validation_count(idx.len());
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    let split = SplitProtocol { train, val, test };
    assert!(split.is_leak_free(samples), "split leaked S2 images into training");
    Ok(split)
}

impl SplitProtocol {
    /// Pairwise disjoint, and no S2 image in train or validation.
    pub fn is_leak_free(&self, samples: &[LabeledSample]) -> bool {
        let mut seen = vec![false; samples.len()];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if i >= samples.len() || seen[i] {
                return false;
            }
            seen[i] = true;
        }
        self.train
            .iter()
            .chain(&self.val)
            .all(|&i| samples[i].sample_set == SampleSet::S1)
            && self.test.iter().all(|&i| samples[i].sample_set == SampleSet::S2)
    }

    pub fn select<'a>(samples: &'a [LabeledSample], idx: &[usize]) -> Vec<&'a LabeledSample> {
        idx.iter().map(|&i| &samples[i]).collect()
    }
}
