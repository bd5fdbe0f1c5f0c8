use super::bank::FederatedFeatureBank;
use crate::error::{Error, Result};
use crate::numeric::{classifier_grad, Matrix};

/// `steps` full-batch gradient steps of cross-entropy over every
/// (federated feature, label) pair in the bank, starting from `init`.
pub fn retrain_classifier(bank: &FederatedFeatureBank, init: &Matrix, steps: usize, lr: f64) -> Result<Matrix> {
    if bank.is_empty() {
        return Err(Error::invalid("cannot re-train on an empty feature bank"));
    }
    if init.shape() != (bank.classes(), bank.dim()) {
        return Err(Error::invalid(format!(
            "classifier init is {:?}, bank needs {:?}",
            init.shape(),
            (bank.classes(), bank.dim())
        )));
    }
    let (features, labels) = bank.stacked();
    let mut v = init.clone();
    for _ in 0..steps {
        let g = classifier_grad(&v, &features, &labels)?;
        v = v.sgd_step(&g, lr)?;
    }
    Ok(v)
}
