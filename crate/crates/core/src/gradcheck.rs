//! Central finite-difference verification of analytic gradients.

use crate::error::{Error, Result};
use crate::model::{AggNetConfig, AggNetParams, GradingCurveLabel, Layers};
use crate::tape::{GradTape, NodeId};
use crate::tensor::{FeatureMap, Tensor};
use crate::train::record_batch_loss;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Worst relative error per parameter block, in block order.
    pub block_errors: Vec<f64>,
    /// Relative error of every checked element, in check order.
    pub element_errors: Vec<f64>,
    /// Largest `|analytic − numeric|`.
    pub max_abs_error: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.block_errors.iter().copied().fold(0.0, f64::max)
    }

    /// Checked elements whose relative error is at least `tolerance`.
    pub fn count_at_least(&self, tolerance: f64) -> usize {
        self.element_errors.iter().filter(|e| **e >= tolerance).count()
    }
}

/// `|a - n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares `analytic` against central differences of `loss` around `params`.
///
/// `stride` > 1 checks every `stride`-th element of each block (the first
/// element is always checked), which keeps the cost bounded for large models.
pub fn grad_check<F>(
    params: &[Tensor],
    analytic: &[Tensor],
    eps: f64,
    stride: usize,
    mut loss: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&[Tensor]) -> Result<f64>,
{
    if params.len() != analytic.len() {
        return Err(Error::contract("one analytic gradient per parameter block"));
    }
    if let Some((p, g)) = params.iter().zip(analytic).find(|(p, g)| p.shape() != g.shape()) {
        return Err(Error::contract(format!(
            "gradient shape {:?} differs from parameter shape {:?}",
            g.shape(),
            p.shape()
        )));
    }
    let stride = stride.max(1);
    let mut work = params.to_vec();
    let mut block_errors = Vec::with_capacity(params.len());
    let mut element_errors = Vec::new();
    let mut max_abs_error: f64 = 0.0;
    for b in 0..work.len() {
        let mut worst: f64 = 0.0;
        for i in (0..work[b].len()).step_by(stride) {
            let orig = work[b].data()[i];
            work[b].data_mut()[i] = orig + eps;
            let plus = loss(&work)?;
            work[b].data_mut()[i] = orig - eps;
            let minus = loss(&work)?;
            work[b].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[b].data()[i];
            let e = relative_error(a, numeric);
            worst = worst.max(e);
            max_abs_error = max_abs_error.max((a - numeric).abs());
            element_errors.push(e);
        }
        block_errors.push(worst);
    }
    Ok(GradCheckReport {
        block_errors,
        checked: element_errors.len(),
        element_errors,
        max_abs_error,
    })
}

/// Runs `build` on a tape, back-propagates, and checks the result against
/// finite differences of the same builder.
///
/// `build` receives the tape and one param node per block and returns the
/// scalar loss node.
pub fn check_tape_gradients<F>(params: &[Tensor], eps: f64, stride: usize, build: F) -> Result<GradCheckReport>
where
    F: for<'a> Fn(&mut GradTape<'a>, &[NodeId]) -> Result<NodeId>,
{
    let analytic = {
        let mut tape = GradTape::new();
        let ids: Vec<NodeId> = params.iter().map(|p| tape.param(p)).collect();
        let loss = build(&mut tape, &ids)?;
        let mut grads = tape.backward(loss)?;
        ids.iter()
            .zip(params)
            .map(|(&id, p)| grads.take(id).unwrap_or_else(|| Tensor::zeros(p.shape().to_vec())))
            .collect::<Vec<_>>()
    };
    grad_check(params, &analytic, eps, stride, |ps| {
        let mut tape = GradTape::new();
        let ids: Vec<NodeId> = ps.iter().map(|p| tape.param(p)).collect();
        let loss = build(&mut tape, &ids)?;
        Ok(tape.value(loss).data()[0])
    })
}

/// Image with channel values drawn uniformly from `[0, 1)`.
pub fn random_image(height: usize, width: usize, seed: u64) -> FeatureMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FeatureMap::from_fn(height, width, 3, |_, _, _| rng.random::<f64>())
}

/// Checks the gradient of the single-image training loss `CE + λ·Σw²`
/// with respect to every parameter block of the network.
#[allow(clippy::too_many_arguments)]
pub fn check_aggnet_gradients(
    params: &AggNetParams,
    cfg: &AggNetConfig,
    image: &FeatureMap,
    target: GradingCurveLabel,
    l2_lambda: f64,
    eps: f64,
    stride: usize,
) -> Result<GradCheckReport> {
    params.check_shapes(cfg)?;
    check_tape_gradients(&params.to_vec(), eps, stride, |tape, ids| {
        let nodes = Layers::from_ordered(ids.to_vec())?;
        Ok(record_batch_loss(tape, &nodes, vec![(image.clone(), target)], cfg, l2_lambda)?.total)
    })
}
