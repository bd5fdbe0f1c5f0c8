//! Softmax cross-entropy and the closed-form classifier gradient.

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Row-wise softmax, stabilized by subtracting each row's maximum.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        softmax_in_place(out.row_mut(i));
    }
    out
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in row.iter_mut() {
        *x /= total;
    }
}

fn check_labels(labels: &[usize], classes: usize) -> Result<()> {
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::invalid(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    Ok(())
}

/// Logits `z_i · vᵀ` for every feature row; the classifier has no bias.
pub fn classifier_logits(classifier: &Matrix, features: &Matrix) -> Result<Matrix> {
    if classifier.cols() != features.cols() {
        return Err(Error::invalid(format!(
            "classifier is {}x{} but features have {} columns",
            classifier.rows(),
            classifier.cols(),
            features.cols()
        )));
    }
    features.matmul_t(classifier)
}

/// Mean softmax cross-entropy and its gradient with respect to the logits,
/// `(softmax(l_i) − onehot(y_i)) / n`.
pub fn softmax_ce(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    let (n, classes) = logits.shape();
    if labels.len() != n {
        return Err(Error::invalid(format!(
            "{} labels for {n} logit rows",
            labels.len()
        )));
    }
    if n == 0 {
        return Err(Error::invalid("softmax_ce on an empty batch"));
    }
    check_labels(labels, classes)?;
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut grad = logits.clone();
    for (i, &y) in labels.iter().enumerate() {
        let row = grad.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_total = row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
        // −log softmax_y computed in log space, so it never evaluates log(0).
        loss += log_total - (row[y] - max);
        softmax_in_place(row);
        row[y] -= 1.0;
        for x in row.iter_mut() {
            *x *= inv_n;
        }
    }
    Ok((loss * inv_n, grad))
}

/// Exact gradient of the mean softmax cross-entropy with respect to the
/// classifier matrix: `(1/n) Σ_i (softmax(v z_i) − onehot(y_i)) z_iᵀ`.
pub fn classifier_grad(classifier: &Matrix, features: &Matrix, labels: &[usize]) -> Result<Matrix> {
    if features.rows() == 0 {
        return Err(Error::invalid("classifier_grad needs at least one feature"));
    }
    let logits = classifier_logits(classifier, features)?;
    let (_, dlogits) = softmax_ce(&logits, labels)?;
    dlogits.t_matmul(features)
}
