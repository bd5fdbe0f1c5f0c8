use std::collections::BTreeMap;

use rayon::prelude::*;

use super::bank::FederatedFeatureBank;
use crate::error::{Error, Result};
use crate::numeric::{matching_loss_and_grad, Matrix};

/// Matching-loss trajectory summary for one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchTrace {
    pub initial: f64,
    pub final_loss: f64,
    /// Largest single-step increase seen (0 when the loss never went up).
    pub max_increase: f64,
}

/// Runs `steps` plain gradient-descent steps on the matching loss for each
/// class that has an aggregated gradient; other classes are untouched.
/// Returns one trace per class (`None` for untouched classes).
pub fn optimize_federated_features(
    bank: &mut FederatedFeatureBank,
    v_hat: &Matrix,
    g_agg: &BTreeMap<usize, Matrix>,
    steps: usize,
    lr: f64,
) -> Result<Vec<Option<MatchTrace>>> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::invalid(format!("feature learning rate must be >= 0, got {lr}")));
    }
    if bank.is_empty() {
        return Ok(vec![None; bank.classes()]);
    }
    if let Some(&c) = g_agg.keys().find(|&&c| c >= bank.classes()) {
        return Err(Error::invalid(format!("gradient for unknown class {c}")));
    }
    // Classes are independent; each block only sees its own target.
    bank.blocks_mut()
        .par_iter_mut()
        .enumerate()
        .map(|(c, block)| match g_agg.get(&c) {
            Some(target) => optimize_block(block, v_hat, c, target, steps, lr).map(Some),
            None => Ok(None),
        })
        .collect()
}

fn optimize_block(
    block: &mut Matrix,
    v_hat: &Matrix,
    class: usize,
    target: &Matrix,
    steps: usize,
    lr: f64,
) -> Result<MatchTrace> {
    let (initial, mut grad) = matching_loss_and_grad(v_hat, block, class, target)?;
    let mut loss = initial;
    let mut max_increase: f64 = 0.0;
    for _ in 0..steps {
        *block = block.sgd_step(&grad, lr)?;
        let (next, next_grad) = matching_loss_and_grad(v_hat, block, class, target)?;
        max_increase = max_increase.max(next - loss);
        loss = next;
        grad = next_grad;
    }
    Ok(MatchTrace {
        initial,
        final_loss: loss,
        max_increase,
    })
}
