use rayon::prelude::*;

use super::aggregate::fedavg_aggregate;
use super::client::{train_locally, Federation, LocalRule, LocalTraining};
use super::sampling::{sample_clients, RoundPlan};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, GroupThresholds, RoundReport};
use crate::numeric::ModelParams;

#[derive(Debug, Clone, PartialEq)]
pub struct FedAvgConfig {
    pub rounds: usize,
    pub client_ratio: f64,
    pub local: LocalTraining,
    pub rule: LocalRule,
}

/// What the harness evaluates against each round.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub testset: &'a LabeledDataset,
    pub train_counts: &'a [usize],
    pub thresholds: GroupThresholds,
}

/// Local updates from the active clients, in ascending client order.
/// Clients without data are dropped.
pub fn collect_local_models(
    federation: &Federation,
    global: &ModelParams,
    plan: &RoundPlan,
    local: &LocalTraining,
    rule: LocalRule,
) -> Result<Vec<(ModelParams, usize)>> {
    let results: Vec<Result<Option<(ModelParams, usize)>>> = plan
        .active
        .par_iter()
        .map(|&k| {
            let client = federation.client(k);
            Ok(train_locally(client, global, plan.round, local, rule)?.map(|w| (w, client.num_samples())))
        })
        .collect();
    results.into_iter().filter_map(Result::transpose).collect()
}

/// Aggregates whatever the clients returned; if every active client was
/// empty the global model carries over unchanged.
pub fn aggregate_or_keep(global: &ModelParams, updates: &[(ModelParams, usize)]) -> Result<ModelParams> {
    if updates.is_empty() {
        return Ok(global.clone());
    }
    let refs: Vec<(&ModelParams, usize)> = updates.iter().map(|(w, n)| (w, *n)).collect();
    fedavg_aggregate(&refs)
}

/// One FedAvg round: local updates on `A^t`, then weighted aggregation.
pub fn fedavg_round(
    federation: &Federation,
    global: &ModelParams,
    plan: &RoundPlan,
    local: &LocalTraining,
    rule: LocalRule,
) -> Result<ModelParams> {
    let updates = collect_local_models(federation, global, plan, local, rule)?;
    aggregate_or_keep(global, &updates)
}

#[derive(Debug, Clone)]
pub struct FedAvgRun {
    pub model: ModelParams,
    pub reports: Vec<RoundReport>,
}

/// `rounds` rounds of sample → local update → aggregate → evaluate.
pub fn run_fedavg(
    cfg: &FedAvgConfig,
    federation: &Federation,
    init: ModelParams,
    eval: EvalContext<'_>,
) -> Result<FedAvgRun> {
    cfg.validate()?;
    let mut model = init;
    let mut reports = Vec::with_capacity(cfg.rounds);
    for t in 0..cfg.rounds {
        let plan = sample_clients(federation.len(), cfg.client_ratio, federation.stream(), t)
            .map_err(|e| e.in_round(t))?;
        model = fedavg_round(federation, &model, &plan, &cfg.local, cfg.rule).map_err(|e| e.in_round(t))?;
        let global = evaluate(&model, eval.testset, eval.train_counts, eval.thresholds)?;
        reports.push(RoundReport {
            round: t,
            global,
            retrained: None,
            match_loss_pre: Default::default(),
            match_loss_post: Default::default(),
            feat_dissim: Default::default(),
            stale_classes: 0,
            wall_time_ms: 0.0,
        });
    }
    Ok(FedAvgRun { model, reports })
}

impl FedAvgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.client_ratio > 0.0 && self.client_ratio <= 1.0) {
            return Err(Error::invalid("client_ratio must be in (0, 1]"));
        }
        Ok(())
    }
}
