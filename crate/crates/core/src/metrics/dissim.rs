use super::groups::{group_means, GroupStats, GroupThresholds};
use crate::creff::FederatedFeatureBank;
use crate::error::{Error, Result};
use crate::numeric::{row_dissimilarity, Matrix};

fn mean_pairwise_dissimilarity(fed: &Matrix, real: &Matrix) -> f64 {
    let total: f64 = fed
        .row_iter()
        .map(|s| real.row_iter().map(|z| row_dissimilarity(s, z)).sum::<f64>())
        .sum();
    total / (fed.rows() * real.rows()) as f64
}

/// Per class, the mean of `1 − cos(s, z)` over every pair of a federated
/// feature `s` and a real feature `z`; `None` for classes without real
/// features.
pub fn class_feature_dissimilarity(
    bank: &FederatedFeatureBank,
    real_by_class: &[Matrix],
) -> Result<Vec<Option<f64>>> {
    if real_by_class.len() != bank.classes() {
        return Err(Error::invalid(format!(
            "{} real feature blocks for a {}-class bank",
            real_by_class.len(),
            bank.classes()
        )));
    }
    real_by_class
        .iter()
        .enumerate()
        .map(|(c, real)| {
            let fed = bank.class_features(c);
            if real.rows() == 0 || fed.rows() == 0 {
                return Ok(None);
            }
            if real.cols() != fed.cols() {
                return Err(Error::invalid("real and federated feature widths differ"));
            }
            Ok(Some(mean_pairwise_dissimilarity(fed, real)))
        })
        .collect()
}

/// Group averages of [`class_feature_dissimilarity`].
pub fn feature_dissimilarity(
    bank: &FederatedFeatureBank,
    real_by_class: &[Matrix],
    train_counts: &[usize],
    thresholds: GroupThresholds,
) -> Result<GroupStats> {
    let per_class = class_feature_dissimilarity(bank, real_by_class)?;
    Ok(group_means(&per_class, train_counts, thresholds))
}
