use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-class sample counts sorted by cardinality, head class first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassProfile {
    counts: Vec<usize>,
}

impl ClassProfile {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::invalid("class profile needs at least one class"));
        }
        if counts.contains(&0) {
            return Err(Error::invalid("every class count must be at least 1"));
        }
        if counts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("class counts must be non-increasing"));
        }
        Ok(ClassProfile { counts })
    }

    /// Same count for every class.
    pub fn balanced(classes: usize, per_class: usize) -> Result<Self> {
        ClassProfile::new(vec![per_class; classes])
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `n_1 / n_C`.
    pub fn imbalance_factor(&self) -> f64 {
        self.counts[0] as f64 / self.counts[self.counts.len() - 1] as f64
    }
}

/// Exponentially decaying profile `n_c = ⌊n_max · IF^{−c/(C−1)}⌋` for
/// zero-based `c`, so that `n_0 = n_max` and `n_{C−1} = ⌊n_max / IF⌋`.
pub fn longtail_profile(classes: usize, n_max: usize, imbalance_factor: f64) -> Result<ClassProfile> {
    if !(imbalance_factor >= 1.0 && imbalance_factor.is_finite()) {
        return Err(Error::invalid(format!(
            "imbalance factor must be >= 1, got {imbalance_factor}"
        )));
    }
    if classes < 2 {
        return Err(Error::invalid("long-tail profile needs at least 2 classes"));
    }
    if (n_max as f64) < imbalance_factor {
        return Err(Error::invalid(format!(
            "n_max {n_max} is smaller than the imbalance factor {imbalance_factor}"
        )));
    }
    let last = (classes - 1) as f64;
    // Dividing by IF^t keeps both endpoints exact: t = 0 gives n_max and
    // t = 1 gives the correctly rounded n_max / IF.
    let counts = (0..classes)
        .map(|c| (n_max as f64 / imbalance_factor.powf(c as f64 / last)).floor() as usize)
        .collect();
    ClassProfile::new(counts)
}
