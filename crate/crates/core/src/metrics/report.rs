use serde::{Deserialize, Serialize};

use super::eval::EvalReport;
use super::groups::GroupStats;

/// Metrics for one communication round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    /// Aggregated global model `w`.
    pub global: EvalReport,
    /// The method's second model: re-trained for CReFF, τ-normalized for
    /// the τ-norm baseline, absent otherwise.
    pub retrained: Option<EvalReport>,
    /// Per-group matching loss before and after feature optimization.
    pub match_loss_pre: GroupStats,
    pub match_loss_post: GroupStats,
    pub feat_dissim: GroupStats,
    pub stale_classes: usize,
    #[serde(skip)]
    pub wall_time_ms: f64,
}

impl RoundReport {
    /// The model a method hands back as its result.
    pub fn output_eval(&self) -> &EvalReport {
        self.retrained.as_ref().unwrap_or(&self.global)
    }
}
