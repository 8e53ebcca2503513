//! Supervised training: cross-entropy with L2 penalty, Adam, plateau LR decay,
//! early stopping and min-validation-loss checkpoint selection.

mod adam;
mod config;
mod history;
mod loss;
mod schedule;
mod trainer;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use config::TrainConfig;
pub use history::{EpochRecord, TrainHistory};
pub use loss::{cross_entropy, cross_entropy_from_scores, l2_penalty, record_batch_loss, BatchLoss};
pub use schedule::{Plateau, PlateauEvent};
pub use trainer::{
    confusion_on, evaluate, predict_samples, run_repeated, train, train_with, Evaluation, RepeatedRuns, StopReason,
    TrainOutcome,
};
