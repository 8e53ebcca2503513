use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentRanges;
use crate::error::{Error, Result};

/// Optimisation, schedule and augmentation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub initial_lr: f64,
    /// Multiplier applied when the training loss plateaus.
    pub lr_decay_factor: f64,
    /// Epochs without training-loss improvement before the LR drops.
    pub lr_patience: usize,
    /// Epochs without validation-loss improvement before training stops.
    pub early_stop_patience: usize,
    pub l2_lambda: f64,
    pub max_epochs: usize,
    pub seed: u64,
    /// Image scale the training data is prepared at, px/mm.
    pub gsd: f64,
    pub augment: bool,
    /// A loss counts as improved when it drops by more than this fraction of
    /// the best value so far.
    pub min_rel_improvement: f64,
    pub augmentation: AugmentRanges,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 12,
            initial_lr: 0.01,
            lr_decay_factor: 0.1,
            lr_patience: 10,
            early_stop_patience: 10,
            l2_lambda: 1e-5,
            max_epochs: 500,
            seed: 0,
            gsd: 2.0,
            augment: true,
            min_rel_improvement: 1e-6,
            augmentation: AugmentRanges::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch_size and max_epochs must be positive".into());
        }
        if self.lr_patience == 0 || self.early_stop_patience == 0 {
            return bad("patience values must be at least 1".into());
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return bad(format!("initial_lr must be positive, got {}", self.initial_lr));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return bad(format!(
                "lr_decay_factor must be in (0, 1], got {}",
                self.lr_decay_factor
            ));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return bad(format!("l2_lambda must be non-negative, got {}", self.l2_lambda));
        }
        if !(self.gsd > 0.0 && self.gsd.is_finite()) {
            return bad(format!("gsd must be positive, got {}", self.gsd));
        }
        if !(self.min_rel_improvement >= 0.0 && self.min_rel_improvement < 1.0) {
            return bad("min_rel_improvement must be in [0, 1)".into());
        }
        self.augmentation.validate()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}
