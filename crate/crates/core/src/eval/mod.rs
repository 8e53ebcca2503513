//! Overall accuracy, classwise quality, confusion matrices and multi-run
//! aggregation.

mod confusion;
mod report;

pub use confusion::{ConfusionMatrix, Quality};
pub use report::{aggregate_runs, import_predictions, mean_and_sigma, score_predictions, ClassQuality, MetricsReport};
