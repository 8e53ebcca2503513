//! `run.json`: what produced an output directory.

use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;
use crate::exit::CliResult;

#[derive(Debug, Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    seed: u64,
    config_sha256: String,
    config: String,
    /// Command-specific flags, in a stable order.
    arguments: serde_json::Value,
    versions: Versions,
}

#[derive(Debug, Serialize)]
struct Versions {
    aggnet: &'static str,
    aggnet_cli: &'static str,
    checkpoint_format: &'static str,
}

/// Writes `out_dir/run.json`. The record holds no timestamps or host data, so
/// identical inputs give identical files.
pub fn write_run_record(out_dir: &Path, command: &str, cfg: &RunConfig, arguments: serde_json::Value) -> CliResult<()> {
    let record = RunRecord {
        command,
        seed: cfg.train.seed,
        config_sha256: cfg.sha256(),
        config: cfg.to_toml_string(),
        arguments,
        versions: Versions {
            aggnet: aggnet::VERSION,
            aggnet_cli: env!("CARGO_PKG_VERSION"),
            checkpoint_format: std::str::from_utf8(aggnet::model::MAGIC).expect("ascii magic"),
        },
    };
    let text = serde_json::to_string_pretty(&record).expect("run record serialises");
    std::fs::write(out_dir.join("run.json"), text + "\n")?;
    Ok(())
}
