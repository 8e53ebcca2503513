use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::augment;
use crate::data::LabeledSample;
use crate::error::{Error, Result};
use crate::eval::{aggregate_runs, ConfusionMatrix, MetricsReport};
use crate::model::{aggnet_scores, predict_class, AggNetConfig, AggNetParams, Checkpoint, ClassSet, GradingCurveLabel};
use crate::tape::GradTape;
use crate::tensor::{FeatureMap, Tensor};

use super::adam::{adam_step, AdamState};
use super::config::TrainConfig;
use super::history::{EpochRecord, TrainHistory};
use super::loss::{cross_entropy_from_scores, l2_penalty, record_batch_loss};
use super::schedule::{Plateau, PlateauEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    EarlyStopping,
    MaxEpochs,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights of the epoch with the smallest validation loss.
    pub checkpoint: Checkpoint,
    pub history: TrainHistory,
    pub best_epoch: usize,
    pub stop_reason: StopReason,
    /// Augmented images produced; only training batches are augmented.
    pub augmentations_applied: usize,
}

/// Loss and accuracy of a parameter set on a sample list, without
/// augmentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Mean cross-entropy plus L2 penalty.
    pub loss: f64,
    /// Overall accuracy, percent.
    pub oa: f64,
}

pub fn evaluate(
    params: &AggNetParams,
    model: &AggNetConfig,
    samples: &[LabeledSample],
    l2_lambda: f64,
) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::contract("evaluation needs at least one sample"));
    }
    let (mut ce, mut correct) = (0.0, 0);
    for s in samples {
        let scores = aggnet_scores(s.image.image(), params, model)?;
        ce += cross_entropy_from_scores(&scores, s.label.index())?;
        correct += usize::from(predict_class(&scores) == s.label);
    }
    let n = samples.len() as f64;
    Ok(Evaluation {
        loss: ce / n + l2_penalty(params, l2_lambda),
        oa: 100.0 * correct as f64 / n,
    })
}

/// Predicted label of every sample.
pub fn predict_samples(
    params: &AggNetParams,
    model: &AggNetConfig,
    samples: &[LabeledSample],
) -> Result<Vec<GradingCurveLabel>> {
    samples
        .iter()
        .map(|s| Ok(predict_class(&aggnet_scores(s.image.image(), params, model)?)))
        .collect()
}

/// Confusion matrix of a checkpoint on labelled samples.
pub fn confusion_on(checkpoint: &Checkpoint, samples: &[LabeledSample]) -> Result<ConfusionMatrix> {
    let pred = predict_samples(&checkpoint.params, &checkpoint.config, samples)?;
    let refs: Vec<GradingCurveLabel> = samples.iter().map(|s| s.label).collect();
    ConfusionMatrix::from_labels(&pred, &refs, checkpoint.config.class_count)
}

/// [`train_with`] without a progress callback.
pub fn train(
    model: &AggNetConfig,
    classes: &ClassSet,
    train_set: &[LabeledSample],
    val_set: &[LabeledSample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with(model, classes, train_set, val_set, cfg, |_| {})
}

/// Mini-batch Adam training with plateau LR decay on the training loss and
/// early stopping on the validation loss. Returns the weights of the epoch
/// with the smallest validation loss.
///
/// Everything random (initialisation, shuffling, augmentation) derives from
/// `cfg.seed`, so repeated calls give bitwise-identical results.
pub fn train_with(
    model: &AggNetConfig,
    classes: &ClassSet,
    train_set: &[LabeledSample],
    val_set: &[LabeledSample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    model.validate()?;
    if classes.len() != model.class_count {
        return Err(Error::contract("class set size differs from the model's class count"));
    }
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Data(
            "training and validation sets must both be non-empty".into(),
        ));
    }
    let train_ids: HashSet<&str> = train_set.iter().map(|s| s.source_id.as_str()).collect();
    if let Some(s) = val_set.iter().find(|s| train_ids.contains(s.source_id.as_str())) {
        return Err(Error::contract(format!(
            "{} is in both training and validation data",
            s.source_id
        )));
    }
    if let Some(s) = train_set
        .iter()
        .chain(val_set)
        .find(|s| s.label.index() >= model.class_count)
    {
        return Err(Error::contract(format!(
            "{} has a label outside the class set",
            s.source_id
        )));
    }

    let mut params = AggNetParams::init(model, cfg.seed)?;
    let mut adam = AdamState::new(params.iter().map(|(t, _)| t));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5E_ED0F_DA7A);
    let mut lr = cfg.initial_lr;
    let mut lr_plateau = Plateau::new(cfg.lr_patience, cfg.min_rel_improvement);
    let mut stopper = Plateau::new(cfg.early_stop_patience, cfg.min_rel_improvement);
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, usize, AggNetParams)> = None;
    let mut augmentations = 0;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stop_reason = StopReason::MaxEpochs;

    let snapshot = |best: &Option<(f64, usize, AggNetParams)>, history_len: usize| -> Option<Box<Checkpoint>> {
        best.as_ref().map(|(_, epoch, p)| {
            let mut ck = Checkpoint::new(model.clone(), classes.clone(), p.clone(), cfg.seed).expect("shapes checked");
            ck.epoch = *epoch;
            ck.history_len = history_len;
            Box::new(ck)
        })
    };

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut items: Vec<(FeatureMap, GradingCurveLabel)> = Vec::with_capacity(batch.len());
            for &i in batch {
                let s = &train_set[i];
                let image = if cfg.augment {
                    augmentations += 1;
                    let p = augment::sample_augmentation(&cfg.augmentation, &mut rng);
                    augment::apply(s.image.image(), &p)?
                } else {
                    s.image.image().clone()
                };
                items.push((image, s.label));
            }
            let (value, grads) = {
                let mut tape = GradTape::new();
                let nodes = params.map(|t, _| tape.param(t));
                let loss = record_batch_loss(&mut tape, &nodes, items, model, cfg.l2_lambda)?;
                let value = tape.value(loss.total).data()[0];
                if !value.is_finite() {
                    return Err(Error::Diverged {
                        epoch,
                        reason: format!("training loss became {value}"),
                        last_good: snapshot(&best, history.len()),
                    });
                }
                let mut g = tape.backward(loss.total)?;
                let grads: Vec<Tensor> = nodes
                    .iter()
                    .zip(params.iter())
                    .map(|((id, _), (p, _))| g.take(*id).unwrap_or_else(|| Tensor::zeros(p.shape().to_vec())))
                    .collect();
                (value, grads)
            };
            match adam_step(params.iter_mut().map(|(t, _)| t), &grads, &mut adam, lr) {
                Ok(()) => {}
                Err(Error::NonFinite(_)) => {
                    return Err(Error::Diverged {
                        epoch,
                        reason: "non-finite gradient".into(),
                        last_good: snapshot(&best, history.len()),
                    })
                }
                Err(e) => return Err(e),
            }
            loss_sum += value * batch.len() as f64;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let val = evaluate(&params, model, val_set, cfg.l2_lambda).map_err(|e| match e {
            Error::NonFinite(what) => Error::Diverged {
                epoch,
                reason: format!("non-finite {what} during validation"),
                last_good: snapshot(&best, history.len()),
            },
            other => other,
        })?;
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss: val.loss,
            val_oa: val.oa,
            lr,
        };
        history.records.push(record);
        on_epoch(&record);
        if best.as_ref().is_none_or(|(v, _, _)| val.loss < *v) {
            best = Some((val.loss, epoch, params.clone()));
        }
        if lr_plateau.observe(train_loss) == PlateauEvent::Exhausted {
            lr *= cfg.lr_decay_factor;
        }
        if stopper.observe(val.loss) == PlateauEvent::Exhausted {
            stop_reason = StopReason::EarlyStopping;
            break;
        }
    }

    let checkpoint = *snapshot(&best, history.len()).expect("at least one epoch ran");
    Ok(TrainOutcome {
        best_epoch: checkpoint.epoch,
        checkpoint,
        history,
        stop_reason,
        augmentations_applied: augmentations,
    })
}

/// Results of [`run_repeated`].
#[derive(Debug, Clone)]
pub struct RepeatedRuns {
    pub outcomes: Vec<TrainOutcome>,
    /// Test-set confusion matrix of each run.
    pub matrices: Vec<ConfusionMatrix>,
    pub report: MetricsReport,
}

/// Trains one model per seed from scratch and scores each on `test_set`.
pub fn run_repeated(
    model: &AggNetConfig,
    classes: &ClassSet,
    train_set: &[LabeledSample],
    val_set: &[LabeledSample],
    test_set: &[LabeledSample],
    cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<RepeatedRuns> {
    if seeds.is_empty() {
        return Err(Error::contract("run_repeated needs at least one seed"));
    }
    let mut outcomes = Vec::with_capacity(seeds.len());
    let mut matrices = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let run_cfg = TrainConfig { seed, ..cfg.clone() };
        let outcome = train(model, classes, train_set, val_set, &run_cfg)?;
        matrices.push(confusion_on(&outcome.checkpoint, test_set)?);
        outcomes.push(outcome);
    }
    let report = aggregate_runs(&matrices, classes)?;
    Ok(RepeatedRuns {
        outcomes,
        matrices,
        report,
    })
}
