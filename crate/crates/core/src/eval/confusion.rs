use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::GradingCurveLabel;

/// `N × N` counts; rows are reference classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n: usize,
    counts: Vec<u64>,
}

/// Quality of one class; `degenerate` marks an empty denominator, in which
/// case `percent` is reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quality {
    pub percent: f64,
    pub degenerate: bool,
}

impl ConfusionMatrix {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            counts: vec![0; n * n],
        }
    }

    /// Tallies `(reference, prediction)` pairs.
    pub fn from_labels(predictions: &[GradingCurveLabel], references: &[GradingCurveLabel], n: usize) -> Result<Self> {
        if predictions.len() != references.len() {
            return Err(Error::contract(format!(
                "{} predictions for {} references",
                predictions.len(),
                references.len()
            )));
        }
        let mut cm = Self::new(n);
        for (&p, &r) in predictions.iter().zip(references) {
            cm.record(r, p)?;
        }
        Ok(cm)
    }

    /// Builds from row-major rows of counts.
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::contract("confusion matrix rows must form a square"));
        }
        Ok(Self {
            n,
            counts: rows.concat(),
        })
    }

    pub fn record(&mut self, reference: GradingCurveLabel, predicted: GradingCurveLabel) -> Result<()> {
        let (r, p) = (reference.index(), predicted.index());
        if r >= self.n || p >= self.n {
            return Err(Error::contract(format!(
                "label out of range for {} classes (reference {}, predicted {})",
                self.n,
                r + 1,
                p + 1
            )));
        }
        self.counts[r * self.n + p] += 1;
        Ok(())
    }

    /// Elementwise sum.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.n != self.n {
            return Err(Error::contract("cannot merge confusion matrices of different size"));
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn class_count(&self) -> usize {
        self.n
    }

    pub fn get(&self, reference: usize, predicted: usize) -> u64 {
        self.counts[reference * self.n + predicted]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.n.max(1)).map(<[u64]>::to_vec).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        (0..self.n).map(|j| self.get(i, j)).sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        (0..self.n).map(|i| self.get(i, j)).sum()
    }

    /// `100 · trace / total`.
    pub fn overall_accuracy(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::contract("overall accuracy of an empty confusion matrix"));
        }
        Ok(100.0 * self.trace() as f64 / total as f64)
    }

    /// `100 · TP / (TP + FN + FP)` for class `i`.
    pub fn quality(&self, i: usize) -> Result<Quality> {
        if i >= self.n {
            return Err(Error::contract(format!("class {} out of range", i + 1)));
        }
        let tp = self.get(i, i);
        let fn_ = self.row_sum(i) - tp;
        let fp = self.col_sum(i) - tp;
        let denom = tp + fn_ + fp;
        Ok(if denom == 0 {
            Quality {
                percent: 0.0,
                degenerate: true,
            }
        } else {
            Quality {
                percent: 100.0 * tp as f64 / denom as f64,
                degenerate: false,
            }
        })
    }

    /// `100 · TP / (TP + FN)`, `None` for an empty row.
    pub fn recall(&self, i: usize) -> Option<f64> {
        let row = self.row_sum(i);
        (row > 0).then(|| 100.0 * self.get(i, i) as f64 / row as f64)
    }

    /// `100 · TP / (TP + FP)`, `None` for an empty column.
    pub fn precision(&self, i: usize) -> Option<f64> {
        let col = self.col_sum(i);
        (col > 0).then(|| 100.0 * self.get(i, i) as f64 / col as f64)
    }

    /// Each row in percent of its reference count; empty rows stay zero.
    pub fn row_percent(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| {
                let row = self.row_sum(i);
                (0..self.n)
                    .map(|j| {
                        if row == 0 {
                            0.0
                        } else {
                            100.0 * self.get(i, j) as f64 / row as f64
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[usize]) -> Vec<GradingCurveLabel> {
        v.iter().map(|&i| GradingCurveLabel::new(i)).collect()
    }

    #[test]
    fn perfect_and_swapped() {
        let r = labels(&[0, 0, 0, 1, 1, 1]);
        let cm = ConfusionMatrix::from_labels(&r, &r, 2).unwrap();
        assert_eq!(cm.rows(), vec![vec![3, 0], vec![0, 3]]);
        assert_eq!(cm.overall_accuracy().unwrap(), 100.0);
        let cm = ConfusionMatrix::from_labels(&labels(&[1, 1]), &labels(&[0, 0]), 2).unwrap();
        assert_eq!(cm.rows(), vec![vec![0, 2], vec![0, 0]]);
    }

    #[test]
    fn oa_and_quality_examples() {
        let cm = ConfusionMatrix::from_rows(&[vec![1, 1], vec![0, 2]]).unwrap();
        assert_eq!(cm.overall_accuracy().unwrap(), 75.0);
        // TP = 8, FN = 1, FP = 1
        let cm = ConfusionMatrix::from_rows(&[vec![8, 1, 0], vec![1, 5, 0], vec![0, 0, 0]]).unwrap();
        assert_eq!(cm.quality(0).unwrap().percent, 80.0);
        assert_eq!(
            cm.quality(2).unwrap(),
            Quality {
                percent: 0.0,
                degenerate: true
            }
        );
    }

    #[test]
    fn errors() {
        assert!(ConfusionMatrix::from_labels(&labels(&[0]), &labels(&[0, 1]), 2).is_err());
        assert!(ConfusionMatrix::from_labels(&labels(&[2]), &labels(&[0]), 2).is_err());
        assert!(ConfusionMatrix::new(3).overall_accuracy().is_err());
        assert!(ConfusionMatrix::new(2).merge(&ConfusionMatrix::new(3)).is_err());
    }

    #[test]
    fn row_percent_sums_to_100() {
        let cm = ConfusionMatrix::from_rows(&[vec![1, 2, 4], vec![0, 0, 0], vec![3, 3, 3]]).unwrap();
        let p = cm.row_percent();
        assert!((p[0].iter().sum::<f64>() - 100.0).abs() < 1e-9);
        assert_eq!(p[1], vec![0.0; 3]);
    }
}
