//! Run configuration: the training keys at top level plus an optional
//! `[model]` table.

use std::path::Path;

use aggnet::model::{AggNetConfig, Variant};
use aggnet::train::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::exit::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub variant: Variant,
    pub stem_depth: usize,
    pub module_depths: [usize; 4],
}

impl Default for ModelSection {
    fn default() -> Self {
        let d = AggNetConfig::default();
        Self {
            variant: d.variant,
            stem_depth: d.stem_depth,
            module_depths: d.module_depths,
        }
    }
}

impl ModelSection {
    pub fn network(&self, class_count: usize) -> CliResult<AggNetConfig> {
        let cfg = AggNetConfig::new(self.variant, class_count).with_depths(self.stem_depth, self.module_depths);
        cfg.validate().map_err(CliError::config)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub model: ModelSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let model = match table.remove("model") {
            Some(v) => v
                .try_into()
                .map_err(|e: toml::de::Error| CliError::Config(format!("[model]: {e}")))?,
            None => ModelSection::default(),
        };
        let rest = toml::to_string(&table).map_err(|e| CliError::Config(e.to_string()))?;
        let train = TrainConfig::from_toml_str(&rest).map_err(CliError::config)?;
        Ok(Self { train, model })
    }

    /// Defaults when `path` is `None`; the command-line seed always wins.
    pub fn load(path: Option<&Path>, seed: Option<u64>) -> CliResult<Self> {
        let mut cfg = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                Self::parse(&text)?
            }
        };
        if let Some(s) = seed {
            cfg.train.seed = s;
        }
        Ok(cfg)
    }

    /// Canonical TOML of the effective configuration.
    pub fn to_toml_string(&self) -> String {
        let mut table: toml::Table = toml::from_str(&self.train.to_toml_string()).expect("train config round-trips");
        table.insert(
            "model".into(),
            toml::Value::try_from(&self.model).expect("model section serialises"),
        );
        toml::to_string(&table).expect("config serialises")
    }

    pub fn sha256(&self) -> String {
        hex(&Sha256::digest(self.to_toml_string().as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_table_is_split_off() {
        let c = RunConfig::parse(
            "max_epochs = 3\n[model]\nvariant = \"Base\"\nstem_depth = 4\nmodule_depths = [4, 4, 4, 4]\n",
        )
        .unwrap();
        assert_eq!(c.train.max_epochs, 3);
        assert_eq!(c.model.variant, Variant::Base);
        assert_eq!(RunConfig::parse(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        assert!(matches!(RunConfig::parse("epochs = 3"), Err(CliError::Config(_))));
        assert!(matches!(
            RunConfig::parse("[model]\ndepth = 3"),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.train.seed = 1;
        assert_eq!(a.sha256(), RunConfig::default().sha256());
        assert_ne!(a.sha256(), b.sha256());
    }
}
