//! Contracts of the training loop, checked on a tiny network and 16 × 16
//! synthetic images so they run in seconds.

use aggnet::data::{extreme_classes, synth_dataset, LabeledSample, SampleSet, SynthParams};
use aggnet::model::{AggNetConfig, ClassSet, Variant};
use aggnet::train::{evaluate, train, Plateau, PlateauEvent, StopReason, TrainConfig};

fn tiny() -> AggNetConfig {
    AggNetConfig::new(Variant::Ms, 3).with_depths(2, [2, 2, 2, 2])
}

fn task() -> (ClassSet, Vec<LabeledSample>, Vec<LabeledSample>) {
    let params = SynthParams {
        extent_mm: (8.0, 8.0),
        ..SynthParams::default()
    };
    let (classes, train_set) = synth_dataset(&extreme_classes(), 3, &params, 31).unwrap();
    let val_params = SynthParams {
        sample_set: SampleSet::S2,
        ..params
    };
    let (_, val_set) = synth_dataset(&extreme_classes(), 1, &val_params, 32).unwrap();
    (classes, train_set, val_set)
}

fn config() -> TrainConfig {
    TrainConfig {
        batch_size: 4,
        lr_patience: 2,
        early_stop_patience: 4,
        min_rel_improvement: 0.0,
        max_epochs: 60,
        augment: true,
        seed: 5,
        ..TrainConfig::default()
    }
}

#[test]
fn early_stopping_and_checkpoint_choice() {
    let (classes, train_set, val_set) = task();
    let cfg = config();
    let out = train(&tiny(), &classes, &train_set, &val_set, &cfg).unwrap();
    let records = &out.history.records;

    let (argmin, _) = records.iter().enumerate().fold((0, f64::INFINITY), |(bi, bv), (i, r)| {
        if r.val_loss < bv {
            (i, r.val_loss)
        } else {
            (bi, bv)
        }
    });
    assert_eq!(out.best_epoch, records[argmin].epoch);
    assert_eq!(out.checkpoint.epoch, out.best_epoch);

    match out.stop_reason {
        StopReason::EarlyStopping => assert_eq!(records.len(), out.best_epoch + cfg.early_stop_patience),
        StopReason::MaxEpochs => assert_eq!(records.len(), cfg.max_epochs),
    }

    // Validation images are never augmented: re-scoring the kept weights
    // reproduces the recorded validation loss exactly.
    let again = evaluate(&out.checkpoint.params, &tiny(), &val_set, cfg.l2_lambda).unwrap();
    assert_eq!(again.loss, records[argmin].val_loss);
    assert_eq!(out.augmentations_applied, records.len() * train_set.len());
}

#[test]
fn learning_rate_follows_the_training_loss_plateau() {
    let (classes, train_set, val_set) = task();
    let cfg = TrainConfig {
        early_stop_patience: 1000,
        max_epochs: 40,
        ..config()
    };
    let out = train(&tiny(), &classes, &train_set, &val_set, &cfg).unwrap();
    let mut plateau = Plateau::new(cfg.lr_patience, cfg.min_rel_improvement);
    let mut lr = cfg.initial_lr;
    for r in &out.history.records {
        assert_eq!(r.lr, lr, "epoch {}", r.epoch);
        if plateau.observe(r.train_loss) == PlateauEvent::Exhausted {
            lr *= cfg.lr_decay_factor;
        }
    }
    let decays = out.history.records.windows(2).filter(|w| w[1].lr < w[0].lr).count();
    assert!(decays >= 1, "no decay in {} epochs", out.history.len());
}

#[test]
fn overlapping_training_and_validation_data_is_rejected() {
    let (classes, train_set, _) = task();
    assert!(train(&tiny(), &classes, &train_set, &train_set[..1], &config()).is_err());
}
