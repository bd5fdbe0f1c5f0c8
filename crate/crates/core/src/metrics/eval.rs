use serde::{Deserialize, Serialize};

use super::groups::{group_accuracy, GroupStats, GroupThresholds};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::numeric::{classifier_logits, Extractor, Matrix, ModelParams};

/// Top-1 accuracy overall, per class and per count group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall_acc: f64,
    /// `None` for classes absent from the test set.
    pub per_class_acc: Vec<Option<f64>>,
    pub group_acc: GroupStats,
    pub n_test: Vec<usize>,
}

/// Argmax with ties resolved toward the lower index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in row.iter().enumerate().skip(1) {
        if x > row[best] {
            best = j;
        }
    }
    best
}

pub fn evaluate_parts(
    extractor: &Extractor,
    classifier: &Matrix,
    testset: &LabeledDataset,
    train_counts: &[usize],
    thresholds: GroupThresholds,
) -> Result<EvalReport> {
    if testset.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty test set"));
    }
    let logits = classifier_logits(classifier, &extractor.forward(testset.inputs())?)?;
    let classes = classifier.rows();
    let mut correct = vec![0usize; classes];
    let mut n_test = vec![0usize; classes];
    for (row, &y) in logits.row_iter().zip(testset.labels()) {
        if y >= classes {
            return Err(Error::invalid(format!("test label {y} outside {classes} classes")));
        }
        n_test[y] += 1;
        if argmax(row) == y {
            correct[y] += 1;
        }
    }
    let per_class_acc: Vec<Option<f64>> = correct
        .iter()
        .zip(&n_test)
        .map(|(&c, &n)| (n > 0).then(|| c as f64 / n as f64))
        .collect();
    let overall_acc = correct.iter().sum::<usize>() as f64 / testset.len() as f64;
    let group_acc = group_accuracy(&per_class_acc, train_counts, thresholds);
    Ok(EvalReport {
        overall_acc,
        per_class_acc,
        group_acc,
        n_test,
    })
}

pub fn evaluate(
    model: &ModelParams,
    testset: &LabeledDataset,
    train_counts: &[usize],
    thresholds: GroupThresholds,
) -> Result<EvalReport> {
    evaluate_parts(&model.extractor, &model.classifier, testset, train_counts, thresholds)
}
