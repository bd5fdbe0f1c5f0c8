//! Simulation-only access to real training features. Diagnostics that need
//! the clients' raw data go through here; the protocol path never does.

use crate::data::LabeledDataset;
use crate::error::Result;
use crate::numeric::{Extractor, Matrix};

/// Real features of `dataset` under `extractor`, grouped by class.
pub fn collect_real_features(extractor: &Extractor, dataset: &LabeledDataset) -> Result<Vec<Matrix>> {
    let features = extractor.forward(dataset.inputs())?;
    Ok((0..dataset.classes())
        .map(|c| features.select_rows(&dataset.indices_of_class(c)))
        .collect())
}
