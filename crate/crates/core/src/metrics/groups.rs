use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Class grouping by training-sample count: many-shot is `> hi`,
/// medium-shot is `lo..=hi`, few-shot is `< lo`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupThresholds {
    pub hi: usize,
    pub lo: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Many,
    Medium,
    Few,
}

impl GroupThresholds {
    /// `(100, 20)`: many-shot above 100, few-shot below 20.
    pub const IMAGENET_LT: GroupThresholds = GroupThresholds { hi: 100, lo: 20 };
    /// `(1500, 200)`: the grouping used for the CIFAR-10-LT dissimilarity traces.
    pub const CIFAR_LT_FIG3: GroupThresholds = GroupThresholds { hi: 1500, lo: 200 };

    pub fn new(hi: usize, lo: usize) -> Result<Self> {
        if !(hi > lo && lo > 0) {
            return Err(Error::invalid(format!(
                "group thresholds need hi > lo > 0, got ({hi}, {lo})"
            )));
        }
        Ok(GroupThresholds { hi, lo })
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "imagenet-lt" => Some(Self::IMAGENET_LT),
            "cifar-lt-fig3" => Some(Self::CIFAR_LT_FIG3),
            _ => None,
        }
    }

    pub fn classify(&self, count: usize) -> Group {
        if count > self.hi {
            Group::Many
        } else if count >= self.lo {
            Group::Medium
        } else {
            Group::Few
        }
    }
}

/// One value per group; `None` marks an empty (undefined) group.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GroupStats {
    pub many: Option<f64>,
    pub medium: Option<f64>,
    pub few: Option<f64>,
}

impl GroupStats {
    pub fn get(&self, group: Group) -> Option<f64> {
        match group {
            Group::Many => self.many,
            Group::Medium => self.medium,
            Group::Few => self.few,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Group, Option<f64>)> + '_ {
        [Group::Many, Group::Medium, Group::Few]
            .into_iter()
            .map(|g| (g, self.get(g)))
    }
}

/// Unweighted mean of the defined per-class values inside each group.
pub fn group_means(
    per_class: &[Option<f64>],
    train_counts: &[usize],
    thresholds: GroupThresholds,
) -> GroupStats {
    let mut sums = [(0.0, 0usize); 3];
    for (value, &count) in per_class.iter().zip(train_counts) {
        if let Some(v) = value {
            let slot = match thresholds.classify(count) {
                Group::Many => 0,
                Group::Medium => 1,
                Group::Few => 2,
            };
            sums[slot].0 += v;
            sums[slot].1 += 1;
        }
    }
    let mean = |(s, n): (f64, usize)| (n > 0).then(|| s / n as f64);
    GroupStats {
        many: mean(sums[0]),
        medium: mean(sums[1]),
        few: mean(sums[2]),
    }
}

/// Group accuracy from per-class accuracy.
pub fn group_accuracy(
    per_class_acc: &[Option<f64>],
    train_counts: &[usize],
    thresholds: GroupThresholds,
) -> GroupStats {
    group_means(per_class_acc, train_counts, thresholds)
}
