use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grading-curve class, stored as a 0-based index into a [`ClassSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GradingCurveLabel(usize);

impl GradingCurveLabel {
    pub fn new(index: usize) -> Self {
        Self(index)
    }

    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for GradingCurveLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "class {}", self.0 + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Granularity {
    /// Coarse-grained limiting curve.
    A,
    /// Medium-grained.
    B,
    /// Fine-grained.
    C,
}

/// Splits a canonical class name such as `B16` into granularity and largest grain (mm).
pub fn decompose_class_name(name: &str) -> Option<(Granularity, u32)> {
    let (head, tail) = name.split_at_checked(1)?;
    let granularity = match head {
        "A" => Granularity::A,
        "B" => Granularity::B,
        "C" => Granularity::C,
        _ => return None,
    };
    match tail {
        "8" => Some((granularity, 8)),
        "16" => Some((granularity, 16)),
        "32" => Some((granularity, 32)),
        _ => None,
    }
}

/// Ordered list of class names; the position is the label index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSet {
    names: Vec<String>,
}

pub const CANONICAL_CLASSES: [&str; 9] = ["A8", "A16", "A32", "B8", "B16", "B32", "C8", "C16", "C32"];

impl ClassSet {
    /// The nine curves combining granularity A/B/C with largest grain 8/16/32 mm.
    pub fn canonical() -> Self {
        Self {
            names: CANONICAL_CLASSES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() < 2 {
            return Err(Error::Config(format!(
                "a class set needs at least 2 classes, got {}",
                names.len()
            )));
        }
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() || n.contains(|c: char| c.is_whitespace() || c == ',') {
                return Err(Error::Config(format!("invalid class name `{n}`")));
            }
            if names[..i].contains(n) {
                return Err(Error::Config(format!("duplicate class name `{n}`")));
            }
        }
        Ok(Self { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, label: GradingCurveLabel) -> &str {
        &self.names[label.0]
    }

    pub fn label(&self, name: &str) -> Option<GradingCurveLabel> {
        self.names.iter().position(|n| n == name).map(GradingCurveLabel)
    }

    pub fn labels(&self) -> impl Iterator<Item = GradingCurveLabel> {
        (0..self.names.len()).map(GradingCurveLabel)
    }
}
