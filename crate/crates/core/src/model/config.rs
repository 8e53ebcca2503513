use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest accepted input side: four halvings must leave at least one pixel.
pub const MIN_INPUT_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Variant {
    /// Dilation rates 1, 2 and 4 in the multi-scale branches.
    #[default]
    #[serde(rename = "MS", alias = "ms")]
    Ms,
    /// All branches use dilation rate 1; same parameter count as `Ms`.
    #[serde(rename = "Base", alias = "base")]
    Base,
}

impl Variant {
    pub fn dilations(self) -> [usize; 3] {
        match self {
            Variant::Ms => [1, 2, 4],
            Variant::Base => [1, 1, 1],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ms => "MS",
            Variant::Base => "Base",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ms" => Ok(Variant::Ms),
            "base" => Ok(Variant::Base),
            other => Err(Error::Config(format!("unknown variant `{other}` (MS or Base)"))),
        }
    }
}

/// Architecture hyperparameters of the network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggNetConfig {
    pub variant: Variant,
    pub class_count: usize,
    pub stem_depth: usize,
    pub module_depths: [usize; 4],
    /// Output depth of each dilated branch, per module.
    pub branch_depths: [usize; 4],
    pub input_channels: usize,
}

impl Default for AggNetConfig {
    fn default() -> Self {
        Self::new(Variant::Ms, 9)
    }
}

impl AggNetConfig {
    pub fn new(variant: Variant, class_count: usize) -> Self {
        Self {
            variant,
            class_count,
            stem_depth: 32,
            module_depths: [64, 128, 256, 256],
            branch_depths: [32, 64, 128, 128],
            input_channels: 3,
        }
    }

    /// Sets the stem and module depths; each branch gets half its module depth.
    pub fn with_depths(mut self, stem_depth: usize, module_depths: [usize; 4]) -> Self {
        self.stem_depth = stem_depth;
        self.module_depths = module_depths;
        self.branch_depths = module_depths.map(|d| (d / 2).max(1));
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(Error::Config(format!(
                "class count must be at least 2, got {}",
                self.class_count
            )));
        }
        if self.input_channels != 3 {
            return Err(Error::Config(format!(
                "input must have 3 channels, got {}",
                self.input_channels
            )));
        }
        if self.stem_depth == 0 || self.module_depths.contains(&0) || self.branch_depths.contains(&0) {
            return Err(Error::Config("all layer depths must be positive".into()));
        }
        Ok(())
    }

    /// Input depth of module `i`.
    pub fn module_input_depth(&self, i: usize) -> usize {
        if i == 0 {
            self.stem_depth
        } else {
            self.module_depths[i - 1]
        }
    }
}
