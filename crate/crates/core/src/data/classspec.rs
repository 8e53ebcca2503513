//! Grading-curve class definitions as mass fractions per sieve bin.

use std::path::Path;

use crate::error::{Error, Result};

/// Sieve bins in mm: 0–2, 2–8, 8–16, 16–32.
pub const SIEVE_BINS_MM: [(f64, f64); 4] = [(0.0, 2.0), (2.0, 8.0), (8.0, 16.0), (16.0, 32.0)];

/// Mass fraction of each sieve bin for one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    pub name: String,
    pub fractions: [f64; 4],
}

impl ClassSpec {
    /// Fractions must be non-negative and sum to 1 within 1e-9.
    pub fn new(name: impl Into<String>, fractions: [f64; 4]) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::Data(format!("invalid class name `{name}`")));
        }
        if fractions.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::Data(format!(
                "class {name}: fractions must be finite and non-negative"
            )));
        }
        let sum: f64 = fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Data(format!("class {name}: fractions sum to {sum}, not 1")));
        }
        Ok(Self { name, fractions })
    }
}

/// Parses `name f(0-2) f(2-8) f(8-16) f(16-32)` lines; `#` starts a comment.
pub fn parse_class_specs(text: &str) -> Result<Vec<ClassSpec>> {
    let mut out: Vec<ClassSpec> = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(Error::Data(format!(
                "line {}: expected a name and 4 fractions, found {} fields",
                no + 1,
                fields.len()
            )));
        }
        let mut f = [0.0; 4];
        for (slot, s) in f.iter_mut().zip(&fields[1..]) {
            *slot = s
                .parse()
                .map_err(|_| Error::Data(format!("line {}: `{s}` is not a number", no + 1)))?;
        }
        let spec = ClassSpec::new(fields[0], f).map_err(|e| Error::Data(format!("line {}: {e}", no + 1)))?;
        if out.iter().any(|s| s.name == spec.name) {
            return Err(Error::Data(format!("line {}: duplicate class {}", no + 1, spec.name)));
        }
        out.push(spec);
    }
    Ok(out)
}

/// Three well-separated classes: everything in the finest bin, an even
/// mixture, and everything in the coarsest bin.
pub fn extreme_classes() -> Vec<ClassSpec> {
    [
        ("fine", [1.0, 0.0, 0.0, 0.0]),
        ("mixed", [0.25, 0.25, 0.25, 0.25]),
        ("coarse", [0.0, 0.0, 0.0, 1.0]),
    ]
    .into_iter()
    .map(|(n, f)| ClassSpec::new(n, f).expect("valid fractions"))
    .collect()
}

pub fn load_class_specs(path: &Path) -> Result<Vec<ClassSpec>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_class_specs(&text)
}
