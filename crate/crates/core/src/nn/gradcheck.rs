//! Central finite-difference checks of the backward passes.

use rand::seq::index::sample;
use rand::Rng;

use super::{margin_loss, Network, Result};
use crate::seed::rng_from;

/// Denominator floor for the relative error, so coordinates with vanishing
/// gradient are compared absolutely.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// What the network output is scored against.
#[derive(Debug, Clone)]
pub struct LossTarget {
    pub correct: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

impl LossTarget {
    pub fn random(dim: usize, seed: u64) -> Self {
        let mut rng = rng_from(seed);
        let mut v = || (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        LossTarget { correct: v(), negatives: (0..6).map(|_| v()).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compare backprop against central differences with step `h` on `samples`
/// randomly chosen parameter coordinates.
pub fn grad_check(
    net: &Network<f64>,
    input: &[f64],
    target: &LossTarget,
    h: f64,
    samples: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let loss_of = |n: &Network<f64>| -> Result<f64> {
        Ok(margin_loss(&n.forward(input)?, &target.correct, &target.negatives)?.0)
    };
    let trace = net.forward_trace(input)?;
    let (_, d_out) = margin_loss(&trace.output, &target.correct, &target.negatives)?;
    let mut grads = net.zeros_like();
    net.backward(input, &trace, &d_out, &mut grads)?;
    let analytic: Vec<f64> = grads.blobs().into_iter().flatten().copied().collect();

    let total = analytic.len();
    let picked = sample(&mut rng_from(seed), total, samples.min(total));
    let mut probe = net.clone();
    let mut max_rel_error: f64 = 0.0;
    for idx in picked.iter() {
        let original = get_flat(&probe, idx);
        set_flat(&mut probe, idx, original + h);
        let up = loss_of(&probe)?;
        set_flat(&mut probe, idx, original - h);
        let down = loss_of(&probe)?;
        set_flat(&mut probe, idx, original);
        let numeric = (up - down) / (2.0 * h);
        max_rel_error = max_rel_error.max(rel_error(analytic[idx], numeric));
    }
    Ok(GradCheckReport { max_rel_error, checked: picked.len() })
}

/// Finite-difference check of the loss gradient with respect to `pred`.
pub fn loss_grad_check(pred: &[f64], target: &LossTarget, h: f64) -> Result<GradCheckReport> {
    let (_, grad) = margin_loss(pred, &target.correct, &target.negatives)?;
    let mut probe = pred.to_vec();
    let mut max_rel_error: f64 = 0.0;
    for i in 0..pred.len() {
        probe[i] = pred[i] + h;
        let up = margin_loss(&probe, &target.correct, &target.negatives)?.0;
        probe[i] = pred[i] - h;
        let down = margin_loss(&probe, &target.correct, &target.negatives)?.0;
        probe[i] = pred[i];
        max_rel_error = max_rel_error.max(rel_error(grad[i], (up - down) / (2.0 * h)));
    }
    Ok(GradCheckReport { max_rel_error, checked: pred.len() })
}

fn locate(net: &Network<f64>, mut idx: usize) -> (usize, usize) {
    for (b, blob) in net.blobs().iter().enumerate() {
        if idx < blob.len() {
            return (b, idx);
        }
        idx -= blob.len();
    }
    panic!("parameter index out of range");
}

fn get_flat(net: &Network<f64>, idx: usize) -> f64 {
    let (b, i) = locate(net, idx);
    net.blobs()[b][i]
}

fn set_flat(net: &mut Network<f64>, idx: usize, value: f64) {
    let (b, i) = locate(net, idx);
    net.blobs_mut()[b][i] = value;
}
