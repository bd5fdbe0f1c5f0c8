//! Per-round CSV, run summaries and comparison tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::Result;
use crate::metrics::{EvalReport, GroupStats, RoundReport};

pub const SCHEMA_VERSION: u32 = 1;

pub const ROUNDS_HEADER: &str = "round,acc_global,acc_retrained,acc_many,acc_medium,acc_few,\
match_loss_many,match_loss_medium,match_loss_few,feat_dissim_many,feat_dissim_medium,feat_dissim_few";

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn push_groups(cells: &mut Vec<String>, g: &GroupStats) {
    cells.extend([cell(g.many), cell(g.medium), cell(g.few)]);
}

/// Undefined values are empty cells. Group accuracies come from the
/// method's output model; the reported matching loss is post-optimization.
pub fn rounds_csv(history: &[RoundReport]) -> String {
    let mut out = String::from(ROUNDS_HEADER);
    out.push('\n');
    for r in history {
        let mut cells = vec![
            r.round.to_string(),
            r.global.overall_acc.to_string(),
            cell(r.retrained.as_ref().map(|e| e.overall_acc)),
        ];
        push_groups(&mut cells, &r.output_eval().group_acc);
        push_groups(&mut cells, &r.match_loss_post);
        push_groups(&mut cells, &r.feat_dissim);
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_rounds_csv(path: &Path, history: &[RoundReport]) -> Result<()> {
    fs::write(path, rounds_csv(history))?;
    Ok(())
}

/// Final results of one run. Wall time is left out so reruns compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub method: String,
    pub rounds: usize,
    pub config: BTreeMap<String, String>,
    pub final_global: EvalReport,
    /// The re-trained (or τ-normalized) model when the method has one.
    pub final_retrained: Option<EvalReport>,
    /// What the method returns: the second model if present, else global.
    pub final_output: EvalReport,
}

impl Summary {
    pub fn new(config: &ExperimentConfig, rounds: usize, global: EvalReport, retrained: Option<EvalReport>) -> Self {
        let final_output = retrained.clone().unwrap_or_else(|| global.clone());
        Summary {
            schema_version: SCHEMA_VERSION,
            method: config.method.name().to_string(),
            rounds,
            config: config.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            final_global: global,
            final_retrained: retrained,
            final_output,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<()> {
    fs::write(path, summary.to_json())?;
    Ok(())
}

pub const COMPARE_HEADER: &str = "method,acc,acc_many,acc_medium,acc_few,delta_acc,delta_many,delta_medium,delta_few";

/// One row per method; deltas are against the first row's output model.
pub fn compare_csv(rows: &[(String, EvalReport)]) -> String {
    let mut out = String::from(COMPARE_HEADER);
    out.push('\n');
    let Some((_, base)) = rows.first() else {
        return out;
    };
    let diff = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| a - b);
    for (name, e) in rows {
        let g = &e.group_acc;
        let b = &base.group_acc;
        let cells = [
            name.clone(),
            e.overall_acc.to_string(),
            cell(g.many),
            cell(g.medium),
            cell(g.few),
            (e.overall_acc - base.overall_acc).to_string(),
            cell(diff(g.many, b.many)),
            cell(diff(g.medium, b.medium)),
            cell(diff(g.few, b.few)),
        ];
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub const SWEEP_HEADER: &str = "m,acc,acc_global,acc_many,acc_medium,acc_few";

pub fn sweep_csv(rows: &[(usize, Summary)]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for (m, s) in rows {
        let g = &s.final_output.group_acc;
        let cells = [
            m.to_string(),
            s.final_output.overall_acc.to_string(),
            s.final_global.overall_acc.to_string(),
            cell(g.many),
            cell(g.medium),
            cell(g.few),
        ];
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}
