//! Accuracy evaluation and dissimilarity diagnostics.

mod dissim;
mod eval;
mod groups;
pub mod privileged;
mod report;

pub use dissim::{class_feature_dissimilarity, feature_dissimilarity};
pub use eval::{argmax, evaluate, evaluate_parts, EvalReport};
pub use groups::{group_accuracy, group_means, Group, GroupStats, GroupThresholds};
pub use report::RoundReport;
