use std::path::{Path, PathBuf};

use aggnet::data::{
    extreme_classes, load_class_specs, load_dataset, make_splits, read_manifest, synth_dataset, write_dataset,
    write_png, ClassSpec, DatasetReport, LabeledSample, LoadOptions, ManifestEntry, SampleSet, SynthParams,
};
use aggnet::eval::{
    aggregate_runs, import_predictions, mean_and_sigma, score_predictions, ConfusionMatrix, MetricsReport,
};
use aggnet::geometry::{estimate_homography, parse_correspondences, resample_gsd, warp_rectify};
use aggnet::gradcheck::{check_aggnet_gradients, random_image};
use aggnet::model::{AggNetConfig, AggNetParams, Checkpoint, ClassSet, GradingCurveLabel, Variant, CANONICAL_CLASSES};
use aggnet::train::{confusion_on, predict_samples, train_with, StopReason, TrainConfig};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::exit::{CliError, CliResult};
use crate::provenance::write_run_record;
use crate::{parse_pair, Common, Source};

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: aggnet::Error| e.to_string())
}

fn parse_depths(s: &str) -> Result<[usize; 4], String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into()
        .map_err(|v: Vec<usize>| format!("expected 4 depths, got {}", v.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    /// S2 images only.
    Test,
    All,
}

impl Subset {
    fn keeps(self, set: SampleSet) -> bool {
        self == Subset::All || set == SampleSet::S2
    }
}

fn setup(common: &Common) -> CliResult<RunConfig> {
    let cfg = RunConfig::load(common.config.as_deref(), common.seed)?;
    std::fs::create_dir_all(&common.out_dir)
        .map_err(|e| CliError::Contract(format!("{}: {e}", common.out_dir.display())))?;
    Ok(cfg)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::Contract(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    write_text(
        path,
        &(serde_json::to_string_pretty(value).expect("serialisable") + "\n"),
    )
}

/// Canonical classes when every manifest class is one of them, otherwise the
/// classes in order of first appearance.
fn classes_from_manifest(rows: &[ManifestEntry]) -> CliResult<ClassSet> {
    let mut names: Vec<&str> = Vec::new();
    for r in rows {
        if !names.contains(&r.class.as_str()) {
            names.push(&r.class);
        }
    }
    if !names.is_empty() && names.iter().all(|n| CANONICAL_CLASSES.contains(n)) {
        return Ok(ClassSet::canonical());
    }
    Ok(ClassSet::new(names)?)
}

fn synth_specs(src: &Source) -> CliResult<Vec<ClassSpec>> {
    match &src.classes {
        Some(p) => Ok(load_class_specs(p)?),
        None => Ok(extreme_classes()),
    }
}

/// Generates `per_class` images per class for one sample set; ids are PNG
/// paths below `images/`.
fn synthesize(
    specs: &[ClassSpec],
    per_class: usize,
    set: SampleSet,
    gsd: f64,
    extent_mm: (f64, f64),
    seed: u64,
) -> CliResult<(ClassSet, Vec<LabeledSample>)> {
    let params = SynthParams {
        gsd,
        extent_mm,
        sample_set: set,
        ..SynthParams::default()
    };
    let (classes, mut samples) = synth_dataset(specs, per_class, &params, seed)?;
    for s in &mut samples {
        s.source_id = format!("images/{}.png", s.source_id);
    }
    Ok((classes, samples))
}

/// Loads or generates labelled images at `gsd` (native scale for datasets
/// when `None`). `expected` pins the class set, e.g. to a checkpoint's.
fn load_source(
    src: &Source,
    gsd: Option<f64>,
    expected: Option<&ClassSet>,
) -> CliResult<(ClassSet, Vec<LabeledSample>)> {
    let (classes, samples) = match &src.dataset {
        Some(root) => {
            let classes = match expected {
                Some(c) => c.clone(),
                None => classes_from_manifest(&read_manifest(root)?)?,
            };
            let opts = LoadOptions {
                classes: classes.clone(),
                target_gsd: gsd,
            };
            let (samples, report) = load_dataset(root, &opts)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            (classes, samples)
        }
        None => {
            let specs = synth_specs(src)?;
            let gsd = gsd.unwrap_or(SynthParams::default().gsd);
            let (classes, mut samples) = synthesize(
                &specs,
                src.s1_per_class,
                SampleSet::S1,
                gsd,
                src.extent_mm,
                src.data_seed,
            )?;
            samples.extend(
                synthesize(
                    &specs,
                    src.s2_per_class,
                    SampleSet::S2,
                    gsd,
                    src.extent_mm,
                    src.data_seed,
                )?
                .1,
            );
            (classes, samples)
        }
    };
    if let Some(c) = expected {
        if c != &classes {
            return Err(CliError::Contract(format!(
                "data classes {:?} differ from the checkpoint's {:?}",
                classes.names(),
                c.names()
            )));
        }
    }
    Ok((classes, samples))
}

fn pick(samples: &[LabeledSample], idx: &[usize]) -> Vec<LabeledSample> {
    idx.iter().map(|&i| samples[i].clone()).collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_metrics(out_dir: &Path, report: &MetricsReport) -> CliResult<()> {
    write_text(&out_dir.join("metrics.json"), &(report.to_json() + "\n"))?;
    write_text(&out_dir.join("confusion.txt"), &report.to_text())?;
    write_text(&out_dir.join("confusion.svg"), &report.to_svg())
}

#[derive(Debug, Args)]
pub struct RectifyArgs {
    #[command(flatten)]
    common: Common,
    /// Photograph to rectify (PNG).
    #[arg(long)]
    image: PathBuf,
    /// Marker file: one `x_mm y_mm u_px v_px` correspondence per line.
    #[arg(long)]
    markers: PathBuf,
    /// Target ground sampling distance, px/mm.
    #[arg(long)]
    gsd: f64,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "rectified.png")]
    out: PathBuf,
    /// Plane region to keep, `WIDTH,HEIGHT` in mm from the origin; defaults to
    /// the marker bounding box.
    #[arg(long, value_parser = parse_pair)]
    extent_mm: Option<(f64, f64)>,
    /// Write 16-bit instead of 8-bit samples.
    #[arg(long)]
    sixteen_bit: bool,
}

pub fn rectify(a: RectifyArgs) -> CliResult<()> {
    let cfg = setup(&a.common)?;
    if !(a.gsd.is_finite() && a.gsd > 0.0) {
        return Err(CliError::Config(format!("--gsd must be positive, got {}", a.gsd)));
    }
    let image = aggnet::data::read_png(&a.image)?;
    let text =
        std::fs::read_to_string(&a.markers).map_err(|e| CliError::Contract(format!("{}: {e}", a.markers.display())))?;
    let points = parse_correspondences(&text)?;
    let est = estimate_homography(&points)?;
    let extent = match a.extent_mm {
        Some(e) => e,
        None => points
            .iter()
            .fold((0.0_f64, 0.0_f64), |(w, h), p| (w.max(p.x_mm), h.max(p.y_mm))),
    };
    let rect = warp_rectify(&image, &est.homography, a.gsd, extent)?;
    let out = a.common.out_dir.join(&a.out);
    write_png(&out, rect.image.image(), a.sixteen_bit)?;
    println!("reprojection RMSE: {:.6} px", est.rmse_px);
    println!(
        "rectified {}x{} px at {} px/mm, {:.1}% covered by the photograph",
        rect.image.image().width(),
        rect.image.image().height(),
        a.gsd,
        100.0 * rect.valid_fraction()
    );
    write_json(
        &a.common.out_dir.join("rectify.json"),
        &json!({
            "rmse_px": est.rmse_px,
            "condition_number": est.condition_number,
            "homography_mm_to_px": est.homography.rows(),
            "width_px": rect.image.image().width(),
            "height_px": rect.image.image().height(),
            "gsd_px_per_mm": a.gsd,
            "valid_fraction": rect.valid_fraction(),
        }),
    )?;
    write_run_record(
        &a.common.out_dir,
        "rectify",
        &cfg,
        json!({
            "image": a.image, "markers": a.markers, "gsd": a.gsd, "out": a.out,
            "extent_mm": extent, "sixteen_bit": a.sixteen_bit,
        }),
    )
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    common: Common,
    /// Class definitions (`name f0-2 f2-8 f8-16 f16-32` per line); defaults to
    /// fine / mixed / coarse.
    #[arg(long)]
    classes: Option<PathBuf>,
    /// Images per class and sample set.
    #[arg(long, default_value_t = 50)]
    per_class: usize,
    /// Sample sets to generate.
    #[arg(long, value_delimiter = ',', default_value = "S1,S2", value_parser = parse_set)]
    sets: Vec<SampleSet>,
    /// Image scale, px/mm; defaults to the config's `gsd`.
    #[arg(long)]
    gsd: Option<f64>,
    /// Image extent, `WIDTH,HEIGHT` in mm.
    #[arg(long, default_value = "64,64", value_parser = parse_pair)]
    extent_mm: (f64, f64),
}

fn parse_set(s: &str) -> Result<SampleSet, String> {
    s.parse().map_err(|e: aggnet::Error| e.to_string())
}

pub fn synth(a: SynthArgs) -> CliResult<()> {
    let cfg = setup(&a.common)?;
    let specs = match &a.classes {
        Some(p) => load_class_specs(p).map_err(|e| CliError::Config(e.to_string()))?,
        None => extreme_classes(),
    };
    let gsd = a.gsd.unwrap_or(cfg.train.gsd);
    let mut classes = None;
    let mut samples = Vec::new();
    let mut sets = a.sets.clone();
    sets.sort();
    sets.dedup();
    for &set in &sets {
        let (c, s) = synthesize(&specs, a.per_class, set, gsd, a.extent_mm, cfg.train.seed)?;
        classes = Some(c);
        samples.extend(s);
    }
    let classes = classes.ok_or_else(|| CliError::Config("--sets is empty".into()))?;
    write_dataset(&a.common.out_dir, &samples, &classes)?;
    let report = DatasetReport::of(&samples, &classes);
    println!("wrote {} images to {}", samples.len(), a.common.out_dir.display());
    write_json(&a.common.out_dir.join("synth.json"), &report)?;
    write_run_record(
        &a.common.out_dir,
        "synth",
        &cfg,
        json!({
            "classes": a.classes, "per_class": a.per_class, "sets": sets,
            "gsd": gsd, "extent_mm": a.extent_mm,
        }),
    )
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: Source,
    /// Network variant; overrides `[model] variant`.
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    /// Require the full 50-images-per-class S1 protocol.
    #[arg(long)]
    strict: bool,
}

fn network(cfg: &RunConfig, variant: Option<Variant>, class_count: usize) -> CliResult<AggNetConfig> {
    let mut model = cfg.model.network(class_count)?;
    if let Some(v) = variant {
        model = model.with_variant(v);
    }
    Ok(model)
}

fn source_json(s: &Source) -> serde_json::Value {
    json!({
        "dataset": s.dataset, "synthetic": s.synthetic, "classes": s.classes,
        "s1_per_class": s.s1_per_class, "s2_per_class": s.s2_per_class,
        "data_seed": s.data_seed, "extent_mm": s.extent_mm,
    })
}

pub fn train(a: TrainArgs) -> CliResult<()> {
    let cfg = setup(&a.common)?;
    let (classes, samples) = load_source(&a.source, Some(cfg.train.gsd), None)?;
    let model = network(&cfg, a.variant, classes.len())?;
    let split = make_splits(&samples, classes.len(), cfg.train.seed, a.strict)?;
    let (train_set, val_set, test_set) = (
        pick(&samples, &split.train),
        pick(&samples, &split.val),
        pick(&samples, &split.test),
    );
    eprintln!(
        "{} training, {} validation, {} test images; {} parameters",
        train_set.len(),
        val_set.len(),
        test_set.len(),
        AggNetParams::init(&model, 0)?.param_count()
    );
    let progress = |r: &aggnet::train::EpochRecord| {
        eprintln!(
            "epoch {:>3}  train {:.5}  val {:.5}  val OA {:5.1}%  lr {:e}",
            r.epoch, r.train_loss, r.val_loss, r.val_oa, r.lr
        )
    };
    let outcome = match train_with(&model, &classes, &train_set, &val_set, &cfg.train, progress) {
        Ok(o) => o,
        Err(aggnet::Error::Diverged {
            epoch,
            reason,
            last_good,
        }) => {
            if let Some(ck) = last_good {
                ck.save(&a.common.out_dir.join("checkpoint.last-good.aggnet"))?;
            }
            return Err(CliError::Contract(format!(
                "training diverged at epoch {epoch}: {reason}"
            )));
        }
        Err(e) => return Err(e.into()),
    };
    outcome.checkpoint.save(&a.common.out_dir.join("checkpoint.aggnet"))?;
    outcome.history.write_csv(&a.common.out_dir.join("history.csv"))?;
    let test_oa = if test_set.is_empty() {
        None
    } else {
        Some(confusion_on(&outcome.checkpoint, &test_set)?.overall_accuracy()?)
    };
    println!(
        "best epoch {} of {}; stopped by {}",
        outcome.best_epoch,
        outcome.history.len(),
        match outcome.stop_reason {
            StopReason::EarlyStopping => "early stopping",
            StopReason::MaxEpochs => "the epoch limit",
        }
    );
    if let Some(oa) = test_oa {
        println!("test OA {oa:.1}%");
    }
    write_json(
        &a.common.out_dir.join("train.json"),
        &json!({
            "variant": model.variant,
            "best_epoch": outcome.best_epoch,
            "epochs_run": outcome.history.len(),
            "stop_reason": format!("{:?}", outcome.stop_reason),
            "augmentations_applied": outcome.augmentations_applied,
            "split_sizes": [train_set.len(), val_set.len(), test_set.len()],
            "test_oa": test_oa,
        }),
    )?;
    let mut args = source_json(&a.source);
    args["variant"] = json!(model.variant);
    args["strict"] = json!(a.strict);
    write_run_record(&a.common.out_dir, "train", &cfg, args)
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    source: Source,
    #[arg(long, value_enum, default_value_t = Subset::Test)]
    subset: Subset,
}

pub fn eval(a: EvalArgs) -> CliResult<()> {
    let cfg = setup(&a.common)?;
    let ck = Checkpoint::load(&a.checkpoint)?;
    let (classes, samples) = load_source(&a.source, Some(cfg.train.gsd), Some(&ck.classes))?;
    let chosen: Vec<LabeledSample> = samples.into_iter().filter(|s| a.subset.keeps(s.sample_set)).collect();
    if chosen.is_empty() {
        return Err(CliError::Contract("no images in the selected subset".into()));
    }
    let pred = predict_samples(&ck.params, &ck.config, &chosen)?;
    let refs: Vec<GradingCurveLabel> = chosen.iter().map(|s| s.label).collect();
    let cm = ConfusionMatrix::from_labels(&pred, &refs, classes.len())?;
    let report = aggregate_runs(&[cm], &classes)?;
    write_metrics(&a.common.out_dir, &report)?;
    let mut csv = String::from("image_id,predicted_class\n");
    for (s, p) in chosen.iter().zip(&pred) {
        csv.push_str(&format!(
            "{},{}\n",
            csv_field(&s.source_id),
            csv_field(classes.name(*p))
        ));
    }
    write_text(&a.common.out_dir.join("predictions.csv"), &csv)?;
    print!("{}", report.to_text());
    let mut args = source_json(&a.source);
    args["checkpoint"] = json!(a.checkpoint);
    args["subset"] = json!(a.subset);
    write_run_record(&a.common.out_dir, "eval", &cfg, args)
}

#[derive(Debug, Args)]
pub struct GsdStudyArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    source: Source,
    /// Image scales to study, px/mm, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    gsds: Vec<f64>,
    /// Independent trainings per scale.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
}

#[derive(Debug, Serialize)]
struct GsdRow {
    gsd: f64,
    oa: Vec<f64>,
    mean_oa: Option<f64>,
    sigma_oa: Option<f64>,
    errors: Vec<String>,
}

pub fn gsd_study(a: GsdStudyArgs) -> CliResult<()> {
    let cfg = setup(&a.common)?;
    let gsds = a.gsds.clone();
    if gsds.is_empty() || gsds.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
        return Err(CliError::Config("--gsds needs positive scales".into()));
    }
    if a.runs == 0 {
        return Err(CliError::Config("--runs must be at least 1".into()));
    }
    // Synthetic images are drawn once at the finest scale and resampled, like
    // photographs.
    let native = if a.source.dataset.is_some() {
        None
    } else {
        Some(gsds.iter().copied().fold(f64::MIN, f64::max))
    };
    let (classes, samples) = load_source(&a.source, native, None)?;
    let model = network(&cfg, a.variant, classes.len())?;
    let mut rows = Vec::with_capacity(gsds.len());
    for &g in &gsds {
        let scaled: Vec<LabeledSample> = samples
            .iter()
            .map(|s| {
                Ok(LabeledSample {
                    image: resample_gsd(&s.image, g)?,
                    ..s.clone()
                })
            })
            .collect::<aggnet::Result<_>>()?;
        let split = make_splits(&scaled, classes.len(), cfg.train.seed, false)?;
        if split.test.is_empty() {
            return Err(CliError::Contract("the study needs S2 test images".into()));
        }
        let (tr, va, te) = (
            pick(&scaled, &split.train),
            pick(&scaled, &split.val),
            pick(&scaled, &split.test),
        );
        let mut row = GsdRow {
            gsd: g,
            oa: Vec::new(),
            mean_oa: None,
            sigma_oa: None,
            errors: Vec::new(),
        };
        for r in 0..a.runs {
            let run_cfg = TrainConfig {
                seed: cfg.train.seed.wrapping_add(r as u64),
                gsd: g,
                ..cfg.train.clone()
            };
            let result = train_with(&model, &classes, &tr, &va, &run_cfg, |_| {})
                .and_then(|o| confusion_on(&o.checkpoint, &te)?.overall_accuracy());
            match result {
                Ok(oa) => row.oa.push(oa),
                Err(e) => row.errors.push(format!("run {r}: {e}")),
            }
        }
        if !row.oa.is_empty() {
            let (m, s, defined) = mean_and_sigma(&row.oa)?;
            row.mean_oa = Some(m);
            row.sigma_oa = defined.then_some(s);
        }
        eprintln!("gsd {g}: OA {:?}, {} failed run(s)", row.oa, row.errors.len());
        rows.push(row);
    }
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut csv = String::from("gsd,mean_oa,sigma_oa,runs,failed_runs\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.gsd,
            opt(r.mean_oa),
            opt(r.sigma_oa),
            r.oa.len(),
            r.errors.len()
        ));
    }
    write_text(&a.common.out_dir.join("gsd_study.csv"), &csv)?;
    write_json(&a.common.out_dir.join("gsd_study.json"), &rows)?;
    print!("{csv}");
    let mut args = source_json(&a.source);
    args["gsds"] = json!(gsds);
    args["runs"] = json!(a.runs);
    args["variant"] = json!(model.variant);
    write_run_record(&a.common.out_dir, "gsd-study", &cfg, args)
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[command(flatten)]
    common: Common,
    /// Check only this variant; both by default.
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    /// Side length of the random input image, px.
    #[arg(long, default_value_t = 16)]
    size: usize,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    /// Largest acceptable relative error.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    #[arg(long, default_value_t = 4)]
    stem_depth: usize,
    #[arg(long, default_value = "4,4,4,4", value_parser = parse_depths)]
    module_depths: [usize; 4],
    #[arg(long, default_value_t = 3)]
    class_count: usize,
    /// Check every n-th element of each parameter block.
    #[arg(long, default_value_t = 1)]
    stride: usize,
}

pub fn gradcheck(a: GradcheckArgs) -> CliResult<()> {
    let cfg = setup(&a.common)?;
    if !(a.eps > 0.0 && a.eps.is_finite()) || a.stride == 0 {
        return Err(CliError::Config(
            "--eps must be positive and --stride at least 1".into(),
        ));
    }
    let variants = match a.variant {
        Some(v) => vec![v],
        None => vec![Variant::Ms, Variant::Base],
    };
    let seed = cfg.train.seed;
    let image = random_image(a.size, a.size, seed);
    let target = GradingCurveLabel::new((seed % a.class_count.max(1) as u64) as usize);
    let mut results = Vec::new();
    let mut worst = 0.0_f64;
    for v in variants {
        let model = AggNetConfig::new(v, a.class_count).with_depths(a.stem_depth, a.module_depths);
        model.validate().map_err(CliError::config)?;
        let params = AggNetParams::init(&model, seed)?;
        let report = check_aggnet_gradients(&params, &model, &image, target, cfg.train.l2_lambda, a.eps, a.stride)?;
        let max = report.max_error();
        worst = worst.max(max);
        println!(
            "{}: max relative error {max:.3e} over {} elements ({})",
            v.name(),
            report.checked,
            if max < a.tolerance { "ok" } else { "exceeds tolerance" }
        );
        results.push(json!({
            "variant": v, "max_relative_error": max,
            "block_errors": report.block_errors, "checked": report.checked,
        }));
    }
    write_json(
        &a.common.out_dir.join("gradcheck.json"),
        &json!({ "eps": a.eps, "tolerance": a.tolerance, "size": a.size, "results": results }),
    )?;
    write_run_record(
        &a.common.out_dir,
        "gradcheck",
        &cfg,
        json!({
            "variant": a.variant, "size": a.size, "eps": a.eps, "tolerance": a.tolerance,
            "stem_depth": a.stem_depth, "module_depths": a.module_depths,
            "class_count": a.class_count, "stride": a.stride,
        }),
    )?;
    if worst < a.tolerance {
        Ok(())
    } else {
        Err(CliError::Contract(format!(
            "max relative error {worst:.3e} is not below {:e}",
            a.tolerance
        )))
    }
}

#[derive(Debug, Args)]
pub struct ScoreFileArgs {
    #[command(flatten)]
    common: Common,
    /// CSV with `image_id,predicted_class` rows.
    #[arg(long)]
    predictions: PathBuf,
    /// Dataset root whose manifest supplies ids and reference classes.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = Subset::Test)]
    subset: Subset,
}

pub fn score_file(a: ScoreFileArgs) -> CliResult<()> {
    let cfg = setup(&a.common)?;
    let rows = read_manifest(&a.dataset)?;
    let classes = classes_from_manifest(&rows)?;
    let mut ids = Vec::new();
    let mut refs = Vec::new();
    for r in &rows {
        let set: SampleSet = r.sample_set.parse()?;
        if a.subset.keeps(set) {
            ids.push(r.path.clone());
            refs.push(
                classes
                    .label(&r.class)
                    .ok_or_else(|| CliError::Contract(format!("unknown class `{}`", r.class)))?,
            );
        }
    }
    let text = std::fs::read_to_string(&a.predictions)
        .map_err(|e| CliError::Contract(format!("{}: {e}", a.predictions.display())))?;
    let preds = import_predictions(&text, &ids, &classes)?;
    let cm = score_predictions(&preds, &refs, classes.len())?;
    println!("scored {} predictions for {} reference images", preds.len(), ids.len());
    if cm.total() == 0 {
        write_json(&a.common.out_dir.join("metrics.json"), &json!({ "predictions": 0 }))?;
    } else {
        let report = aggregate_runs(&[cm], &classes)?;
        write_metrics(&a.common.out_dir, &report)?;
        print!("{}", report.to_text());
    }
    write_run_record(
        &a.common.out_dir,
        "score-file",
        &cfg,
        json!({ "predictions": a.predictions, "dataset": a.dataset, "subset": a.subset }),
    )
}
