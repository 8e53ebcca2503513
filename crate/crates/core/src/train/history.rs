use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Metrics of one epoch; `epoch` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Validation overall accuracy, percent.
    pub val_oa: f64,
    /// Learning rate used during the epoch.
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Epoch with the smallest validation loss (earliest on ties).
    pub fn best_epoch(&self) -> Option<usize> {
        let mut best: Option<&EpochRecord> = None;
        for r in &self.records {
            if best.is_none_or(|b| r.val_loss < b.val_loss) {
                best = Some(r);
            }
        }
        best.map(|r| r.epoch)
    }

    /// CSV with header `epoch,train_loss,val_loss,val_oa,lr`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.records {
            w.serialize(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let records = r
            .deserialize()
            .collect::<std::result::Result<Vec<EpochRecord>, _>>()
            .map_err(|e| Error::Data(format!("history: {e}")))?;
        Ok(Self { records })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_and_best() {
        let mut h = TrainHistory::default();
        for (e, v) in [0.9, 0.5, 0.5, 0.7].iter().enumerate() {
            h.records.push(EpochRecord {
                epoch: e + 1,
                train_loss: 1.0 / (e + 1) as f64,
                val_loss: *v,
                val_oa: 50.0,
                lr: 0.01,
            });
        }
        let text = h.to_csv();
        assert!(text.starts_with("epoch,train_loss,val_loss,val_oa,lr\n"));
        assert_eq!(TrainHistory::from_csv(&text).unwrap(), h);
        assert_eq!(h.best_epoch(), Some(2));
    }
}
