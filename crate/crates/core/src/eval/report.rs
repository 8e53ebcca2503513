use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ClassSet, GradingCurveLabel};

use super::confusion::{ConfusionMatrix, Quality};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassQuality {
    pub class: String,
    pub quality: Quality,
}

/// Accuracy figures of one or more runs scored on the same test set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    /// Mean overall accuracy over runs, percent.
    pub oa: f64,
    /// Sample standard deviation of the per-run OA (`k − 1` denominator).
    pub sigma_oa: f64,
    /// False for a single run, where σ is undefined and reported as 0.
    pub sigma_defined: bool,
    pub run_oa: Vec<f64>,
    /// Quality per class on the joint matrix.
    pub quality: Vec<ClassQuality>,
    /// Sum of the per-run matrices.
    pub confusion: ConfusionMatrix,
    /// Joint matrix with rows in percent.
    pub confusion_row_percent: Vec<Vec<f64>>,
}

/// Mean and sample standard deviation; σ is 0 with `false` when `k = 1`.
pub fn mean_and_sigma(values: &[f64]) -> Result<(f64, f64, bool)> {
    if values.is_empty() {
        return Err(Error::contract("at least one run is needed"));
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() == 1 {
        return Ok((mean, 0.0, false));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Ok((mean, var.sqrt(), true))
}

/// Combines `k ≥ 1` runs: mean OA and σ over runs, summed confusion matrix,
/// and classwise quality of the summed matrix.
pub fn aggregate_runs(runs: &[ConfusionMatrix], classes: &ClassSet) -> Result<MetricsReport> {
    let first = runs
        .first()
        .ok_or_else(|| Error::contract("at least one run is needed"))?;
    if first.class_count() != classes.len() {
        return Err(Error::contract("confusion matrix and class set differ in size"));
    }
    let mut joint = ConfusionMatrix::new(first.class_count());
    let mut run_oa = Vec::with_capacity(runs.len());
    for cm in runs {
        joint.merge(cm)?;
        run_oa.push(cm.overall_accuracy()?);
    }
    let (oa, sigma_oa, sigma_defined) = mean_and_sigma(&run_oa)?;
    let quality = classes
        .labels()
        .map(|l| {
            Ok(ClassQuality {
                class: classes.name(l).to_string(),
                quality: joint.quality(l.index())?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(MetricsReport {
        oa,
        sigma_oa,
        sigma_defined,
        run_oa,
        quality,
        confusion_row_percent: joint.row_percent(),
        confusion: joint,
    })
}

/// Reads `image_id,predicted_class` rows and aligns them to `test_ids`.
///
/// Returns `(index into test_ids, predicted label)` in file order.
pub fn import_predictions(
    text: &str,
    test_ids: &[String],
    classes: &ClassSet,
) -> Result<Vec<(usize, GradingCurveLabel)>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    #[derive(serde::Deserialize)]
    struct Row {
        image_id: String,
        predicted_class: String,
    }
    let index: std::collections::HashMap<&str, usize> =
        test_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    let mut errors = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let line = i + 2;
        match row {
            Err(e) => errors.push(format!("line {line}: {e}")),
            Ok(r) => match (index.get(r.image_id.as_str()), classes.label(&r.predicted_class)) {
                (None, _) => errors.push(format!("line {line}: unknown image id `{}`", r.image_id)),
                (_, None) => errors.push(format!("line {line}: unknown class `{}`", r.predicted_class)),
                (Some(&t), Some(l)) => out.push((t, l)),
            },
        }
    }
    if !errors.is_empty() {
        return Err(Error::Dataset(errors));
    }
    Ok(out)
}

/// Confusion matrix of imported predictions against reference labels.
pub fn score_predictions(
    predictions: &[(usize, GradingCurveLabel)],
    references: &[GradingCurveLabel],
    class_count: usize,
) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(class_count);
    for &(i, p) in predictions {
        let r = *references
            .get(i)
            .ok_or_else(|| Error::contract(format!("prediction for test index {i} has no reference")))?;
        cm.record(r, p)?;
    }
    Ok(cm)
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Summary and row-percent confusion table with one decimal.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let sigma = if self.sigma_defined {
            format!("{:.1}", self.sigma_oa)
        } else {
            "n/a (single run)".to_string()
        };
        let _ = writeln!(s, "runs: {}", self.run_oa.len());
        let _ = writeln!(s, "OA [%]: {:.1}  sigma: {sigma}", self.oa);
        let _ = writeln!(s, "\nclasswise quality [%]:");
        for q in &self.quality {
            let flag = if q.quality.degenerate {
                "  (no samples, no predictions)"
            } else {
                ""
            };
            let _ = writeln!(s, "  {:>8} {:>6.1}{flag}", q.class, q.quality.percent);
        }
        let names: Vec<&str> = self.quality.iter().map(|q| q.class.as_str()).collect();
        let width = names.iter().map(|n| n.len()).max().unwrap_or(0).max(6);
        let _ = writeln!(
            s,
            "\nconfusion [% of reference row], rows = reference, columns = predicted:"
        );
        let _ = write!(s, "{:>width$}", "");
        for n in &names {
            let _ = write!(s, " {n:>width$}");
        }
        s.push('\n');
        for (n, row) in names.iter().zip(&self.confusion_row_percent) {
            let _ = write!(s, "{n:>width$}");
            for v in row {
                let _ = write!(s, " {v:>width$.1}");
            }
            s.push('\n');
        }
        s
    }

    /// Heatmap of the row-normalised confusion matrix.
    pub fn to_svg(&self) -> String {
        let n = self.confusion_row_percent.len();
        let (cell, margin) = (48usize, 72usize);
        let size = margin + n * cell + 8;
        let names: Vec<&str> = self.quality.iter().map(|q| q.class.as_str()).collect();
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" font-family="sans-serif" font-size="12">"#
        );
        for (i, row) in self.confusion_row_percent.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
                margin - 6,
                margin + i * cell + cell / 2 + 4,
                escape(names[i])
            );
            for (j, &v) in row.iter().enumerate() {
                let shade = (255.0 - 2.2 * v).clamp(0.0, 255.0) as u8;
                let text = if v > 60.0 { "white" } else { "black" };
                let (x, y) = (margin + j * cell, margin + i * cell);
                let _ = writeln!(
                    s,
                    r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="rgb({shade},{shade},255)" stroke="gray"/><text x="{}" y="{}" text-anchor="middle" fill="{text}">{v:.1}</text>"#,
                    x + cell / 2,
                    y + cell / 2 + 4
                );
            }
        }
        for (j, name) in names.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                margin + j * cell + cell / 2,
                margin - 8,
                escape(name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two() -> ClassSet {
        ClassSet::new(["a", "b"]).unwrap()
    }

    fn with_oa(correct: u64, total: u64) -> ConfusionMatrix {
        ConfusionMatrix::from_rows(&[vec![correct, total - correct], vec![0, 0]]).unwrap()
    }

    #[test]
    fn two_point_sigma() {
        let r = aggregate_runs(&[with_oa(9, 10), with_oa(10, 10)], &two()).unwrap();
        assert_eq!(r.oa, 95.0);
        assert!((r.sigma_oa - 50f64.sqrt()).abs() < 1e-12);
        assert!(r.sigma_defined);
    }

    #[test]
    fn single_and_identical_runs() {
        let one = aggregate_runs(&[with_oa(7, 10)], &two()).unwrap();
        assert_eq!((one.sigma_oa, one.sigma_defined), (0.0, false));
        let five = aggregate_runs(&vec![with_oa(7, 10); 5], &two()).unwrap();
        assert_eq!(five.sigma_oa, 0.0);
        assert_eq!(five.confusion.total(), 50);
    }

    #[test]
    fn predictions_import() {
        let ids: Vec<String> = ["i1", "i2", "i3"].map(String::from).to_vec();
        let classes = two();
        assert!(import_predictions("", &ids, &classes).unwrap().is_empty());
        let p = import_predictions("image_id,predicted_class\ni2,b\ni1,a\n", &ids, &classes).unwrap();
        assert_eq!(p, vec![(1, GradingCurveLabel::new(1)), (0, GradingCurveLabel::new(0))]);
        assert!(import_predictions("image_id,predicted_class\nzz,a\n", &ids, &classes).is_err());
        assert!(import_predictions("image_id,predicted_class\ni1,D8\n", &ids, &classes).is_err());
        let refs = [
            GradingCurveLabel::new(0),
            GradingCurveLabel::new(1),
            GradingCurveLabel::new(0),
        ];
        let cm = score_predictions(&p, &refs, 2).unwrap();
        assert_eq!(cm.overall_accuracy().unwrap(), 100.0);
    }

    #[test]
    fn renderings() {
        let r = aggregate_runs(&[with_oa(9, 10)], &two()).unwrap();
        assert!(r.to_text().contains("OA [%]: 90.0"));
        assert!(r.to_svg().starts_with("<svg"));
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["oa"], 90.0);
    }
}
