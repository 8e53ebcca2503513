//! `aggnet` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 contract or data
//! error.

mod commands;
mod config;
mod exit;
mod provenance;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use exit::EXIT_USAGE;

#[derive(Debug, Parser)]
#[command(name = "aggnet", version, about = "Grading-curve classification of aggregate images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for every random choice; overrides the config file's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML run configuration (training keys plus an optional `[model]` table).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory receiving all outputs and `run.json`.
    #[arg(long, default_value = "aggnet-out")]
    pub out_dir: PathBuf,
}

/// Where labelled images come from.
#[derive(Debug, Clone, Args)]
pub struct Source {
    /// Dataset root holding `manifest.csv`.
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    pub dataset: Option<PathBuf>,
    /// Generate a synthetic dataset instead of reading one.
    #[arg(long)]
    pub synthetic: bool,
    /// Class definitions for synthetic data; defaults to fine / mixed / coarse.
    #[arg(long, requires = "synthetic")]
    pub classes: Option<PathBuf>,
    /// Synthetic S1 images per class (training plus validation).
    #[arg(long, default_value_t = 50)]
    pub s1_per_class: usize,
    /// Synthetic S2 images per class (test).
    #[arg(long, default_value_t = 50)]
    pub s2_per_class: usize,
    /// Seed of the synthetic generator, independent of the training seed.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    /// Synthetic image extent in mm, `WIDTH,HEIGHT`.
    #[arg(long, default_value = "64,64", value_parser = parse_pair)]
    pub extent_mm: (f64, f64),
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rectify a photograph to a constant GSD from marker correspondences.
    Rectify(commands::RectifyArgs),
    /// Write a synthetic aggregate dataset (PNG images plus manifest).
    Synth(commands::SynthArgs),
    /// Train a network and save the best checkpoint.
    Train(commands::TrainArgs),
    /// Evaluate a checkpoint: metrics JSON, confusion table and heatmap.
    Eval(commands::EvalArgs),
    /// Train and test at several image scales.
    GsdStudy(commands::GsdStudyArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(commands::GradcheckArgs),
    /// Score an external `image_id,predicted_class` file.
    ScoreFile(commands::ScoreFileArgs),
}

pub fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `A,B`, got `{s}`"))?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok((p(a)?, p(b)?))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Rectify(a) => commands::rectify(a),
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::GsdStudy(a) => commands::gsd_study(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::ScoreFile(a) => commands::score_file(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
