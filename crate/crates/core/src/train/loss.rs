use crate::error::{Error, Result};
use crate::model::{record_with_nodes, AggNetConfig, AggNetParams, GradingCurveLabel, Layers, ParamKind};
use crate::ops;
use crate::tape::{GradTape, NodeId};
use crate::tensor::FeatureMap;

/// `−Σ bᵢ log ŝᵢ` for a one-hot `b`, i.e. `−log ŝ` at the true class.
pub fn cross_entropy(probs: &[f64], one_hot: &[f64]) -> Result<f64> {
    if probs.len() != one_hot.len() || probs.len() < 2 {
        return Err(Error::contract(format!(
            "{} probabilities for a {}-entry target",
            probs.len(),
            one_hot.len()
        )));
    }
    let ones = one_hot.iter().filter(|&&b| b == 1.0).count();
    let zeros = one_hot.iter().filter(|&&b| b == 0.0).count();
    if ones != 1 || ones + zeros != one_hot.len() {
        return Err(Error::contract("target is not a one-hot vector"));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::contract("probabilities must be finite and non-negative"));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::contract(format!("probabilities sum to {sum}")));
    }
    let t = one_hot.iter().position(|&b| b == 1.0).expect("one entry is set");
    Ok(-probs[t].ln())
}

/// Cross-entropy straight from raw scores: `logΣexp(s) − s_target`.
pub fn cross_entropy_from_scores(scores: &[f64], target: usize) -> Result<f64> {
    if target >= scores.len() {
        return Err(Error::contract(format!("target {target} out of range")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    Ok(ops::log_sum_exp(scores) - scores[target])
}

/// `λ · Σ w²` over kernel weights; biases are not penalised.
pub fn l2_penalty(params: &AggNetParams, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let sum: f64 = params
        .iter()
        .filter(|(_, kind)| *kind == ParamKind::Kernel)
        .map(|(t, _)| t.data().iter().map(|v| v * v).sum::<f64>())
        .sum();
    lambda * sum
}

/// Loss nodes and bookkeeping of one recorded mini-batch.
#[derive(Debug, Clone, Copy)]
pub struct BatchLoss {
    /// Mean cross-entropy plus L2 penalty.
    pub total: NodeId,
    pub cross_entropy: f64,
    pub l2: f64,
    pub correct: usize,
}

/// Records `mean CE + λ·Σ w²` over `batch` on `tape`.
pub fn record_batch_loss(
    tape: &mut GradTape<'_>,
    nodes: &Layers<NodeId>,
    batch: Vec<(FeatureMap, GradingCurveLabel)>,
    cfg: &AggNetConfig,
    lambda: f64,
) -> Result<BatchLoss> {
    if batch.is_empty() {
        return Err(Error::contract("empty batch"));
    }
    let n = batch.len();
    let mut ces = Vec::with_capacity(n);
    let mut correct = 0;
    for (image, label) in batch {
        let scores = record_with_nodes(tape, image, nodes, cfg)?;
        let s = tape.value(scores).data();
        if crate::model::predict_class(s) == label {
            correct += 1;
        }
        ces.push(tape.softmax_cross_entropy(scores, label.index())?);
    }
    let ce_sum = tape.sum(&ces)?;
    let ce = tape.scale(ce_sum, 1.0 / n as f64)?;
    let kernels: Vec<NodeId> = nodes
        .iter()
        .filter(|(_, k)| *k == ParamKind::Kernel)
        .map(|(id, _)| *id)
        .collect();
    let l2 = tape.sum_squares(&kernels, lambda)?;
    let total = tape.sum(&[ce, l2])?;
    Ok(BatchLoss {
        total,
        cross_entropy: tape.value(ce).data()[0],
        l2: tape.value(l2).data()[0],
        correct,
    })
}
