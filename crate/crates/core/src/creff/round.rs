//! The dual-model round loop.

use rayon::prelude::*;

use super::bank::FederatedFeatureBank;
use super::gradients::{aggregate_class_gradients, client_class_gradients, ClassGradientUpload, ClientUpload};
use super::optimize::{optimize_federated_features, MatchTrace};
use super::retrain::retrain_classifier;
use crate::error::{Error, Result};
use crate::fl::{aggregate_or_keep, sample_clients, train_locally, ClientState, EvalContext, Federation, LocalRule, LocalTraining, RoundPlan};
use crate::metrics::{evaluate_parts, GroupStats, RoundReport};
use crate::numeric::{init_classifier, Matrix, ModelParams};
use crate::rng::SeedStream;

/// Starting point for each round's classifier re-training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrainInit {
    /// The newly aggregated global classifier `v^{t+1}`.
    Warm,
    /// A fresh random classifier per round.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CreffConfig {
    pub client_ratio: f64,
    pub local: LocalTraining,
    /// `I`, matching steps per round.
    pub feature_steps: usize,
    pub feature_lr: f64,
    /// `J`, re-training steps per round.
    pub retrain_steps: usize,
    pub retrain_lr: f64,
    pub retrain_init: RetrainInit,
}

/// Global model `w = {u, v}` and re-trained model `ŵ = {u, v̂}`. The
/// extractor is stored once and shared by both.
#[derive(Debug, Clone, PartialEq)]
pub struct DualModel {
    pub global: ModelParams,
    pub retrained_classifier: Matrix,
}

impl DualModel {
    /// Before any re-training `v̂ = v`.
    pub fn new(global: ModelParams) -> Self {
        let retrained_classifier = global.classifier.clone();
        DualModel {
            global,
            retrained_classifier,
        }
    }

    pub fn retrained(&self) -> ModelParams {
        ModelParams {
            extractor: self.global.extractor.clone(),
            classifier: self.retrained_classifier.clone(),
        }
    }
}

/// Server-side state carried from round to round.
#[derive(Debug, Clone, PartialEq)]
pub struct CreffState {
    pub model: DualModel,
    pub bank: FederatedFeatureBank,
}

/// What the server learned in one round, per class.
#[derive(Debug, Clone, PartialEq)]
pub struct CreffRoundOutcome {
    pub plan: RoundPlan,
    /// Classes that had an aggregated gradient this round.
    pub observed: Vec<bool>,
    pub traces: Vec<Option<MatchTrace>>,
}

impl CreffRoundOutcome {
    pub fn match_loss_pre(&self) -> Vec<Option<f64>> {
        self.traces.iter().map(|t| t.map(|t| t.initial)).collect()
    }

    pub fn match_loss_post(&self) -> Vec<Option<f64>> {
        self.traces.iter().map(|t| t.map(|t| t.final_loss)).collect()
    }
}

/// Client side of a round: local update from `w^t` and per-class gradients
/// through `v̂^t`. `None` when the client has no data.
pub fn client_round(
    client: &ClientState,
    model: &DualModel,
    round: usize,
    local: &LocalTraining,
    rule: LocalRule,
) -> Result<Option<ClientUpload>> {
    let Some(updated) = train_locally(client, &model.global, round, local, rule)? else {
        return Ok(None);
    };
    let class_gradients = client_class_gradients(client.data(), &model.global.extractor, &model.retrained_classifier)?
        .into_iter()
        .map(|g| g.into_upload())
        .collect();
    Ok(Some(ClientUpload {
        model: updated,
        num_samples: client.num_samples(),
        class_gradients,
    }))
}

/// Server side of a round: aggregate models and gradients, optimize the
/// bank against `v̂^t`, then re-train a classifier for the new extractor.
pub fn server_round(
    state: &mut CreffState,
    uploads: &[ClientUpload],
    round: usize,
    cfg: &CreffConfig,
    stream: SeedStream,
) -> Result<(Vec<bool>, Vec<Option<MatchTrace>>)> {
    let models: Vec<(ModelParams, usize)> = uploads.iter().map(|u| (u.model.clone(), u.num_samples)).collect();
    let global_next = aggregate_or_keep(&state.model.global, &models)?;

    let grads: Vec<&[ClassGradientUpload]> = uploads.iter().map(|u| u.class_gradients.as_slice()).collect();
    let g_agg = aggregate_class_gradients(&grads)?;
    let classes = state.bank.classes();
    let mut observed = vec![false; classes];
    for &c in g_agg.keys() {
        if c < classes {
            observed[c] = true;
        }
    }

    let traces = optimize_federated_features(
        &mut state.bank,
        &state.model.retrained_classifier,
        &g_agg,
        cfg.feature_steps,
        cfg.feature_lr,
    )?;

    let retrained_classifier = if state.bank.is_empty() {
        global_next.classifier.clone()
    } else {
        let init = match cfg.retrain_init {
            RetrainInit::Warm => global_next.classifier.clone(),
            RetrainInit::Random => {
                let mut rng = stream.derive("retrain-init", round as u64).rng();
                init_classifier(classes, state.bank.dim(), &mut rng)
            }
        };
        retrain_classifier(&state.bank, &init, cfg.retrain_steps, cfg.retrain_lr)?
    };
    state.model = DualModel {
        global: global_next,
        retrained_classifier,
    };
    Ok((observed, traces))
}

/// One full round: sample `A^t`, client work (in parallel), server work.
pub fn creff_round(
    state: &mut CreffState,
    federation: &Federation,
    round: usize,
    cfg: &CreffConfig,
) -> Result<CreffRoundOutcome> {
    let mut inner = || -> Result<CreffRoundOutcome> {
        let plan = sample_clients(federation.len(), cfg.client_ratio, federation.stream(), round)?;
        let results: Vec<Result<Option<ClientUpload>>> = plan
            .active
            .par_iter()
            .map(|&k| client_round(federation.client(k), &state.model, round, &cfg.local, LocalRule::Sgd))
            .collect();
        let uploads: Vec<ClientUpload> = results.into_iter().filter_map(Result::transpose).collect::<Result<_>>()?;
        let (observed, traces) = server_round(state, &uploads, round, cfg, federation.stream())?;
        Ok(CreffRoundOutcome { plan, observed, traces })
    };
    inner().map_err(|e| e.in_round(round))
}

#[derive(Debug, Clone)]
pub struct CreffRun {
    pub state: CreffState,
    pub reports: Vec<RoundReport>,
}

/// Bank initialization used by [`run_creff`]: standard Gaussian noise.
pub fn initial_bank(classes: usize, per_class: usize, dim: usize, stream: SeedStream) -> Result<FederatedFeatureBank> {
    FederatedFeatureBank::gaussian(classes, per_class, dim, stream.derive("feature-bank", 0))
}

/// `rounds` CReFF rounds from `init`, evaluating both models each round.
pub fn run_creff(
    cfg: &CreffConfig,
    federation: &Federation,
    init: ModelParams,
    per_class: usize,
    rounds: usize,
    eval: EvalContext<'_>,
) -> Result<CreffRun> {
    if !(cfg.client_ratio > 0.0 && cfg.client_ratio <= 1.0) {
        return Err(Error::invalid("client_ratio must be in (0, 1]"));
    }
    let bank = initial_bank(init.classes(), per_class, init.feature_dim(), federation.stream())?;
    let mut state = CreffState {
        model: DualModel::new(init),
        bank,
    };
    let mut ever_seen = vec![false; state.bank.classes()];
    let mut reports = Vec::with_capacity(rounds);
    for t in 0..rounds {
        let outcome = creff_round(&mut state, federation, t, cfg)?;
        for (seen, now) in ever_seen.iter_mut().zip(&outcome.observed) {
            *seen |= now;
        }
        let m = &state.model;
        let global = evaluate_parts(&m.global.extractor, &m.global.classifier, eval.testset, eval.train_counts, eval.thresholds)?;
        let retrained = evaluate_parts(&m.global.extractor, &m.retrained_classifier, eval.testset, eval.train_counts, eval.thresholds)?;
        reports.push(RoundReport {
            round: t,
            global,
            retrained: Some(retrained),
            match_loss_pre: crate::metrics::group_means(&outcome.match_loss_pre(), eval.train_counts, eval.thresholds),
            match_loss_post: crate::metrics::group_means(&outcome.match_loss_post(), eval.train_counts, eval.thresholds),
            feat_dissim: GroupStats::default(),
            stale_classes: ever_seen.iter().filter(|s| !**s).count(),
            wall_time_ms: 0.0,
        });
    }
    Ok(CreffRun { state, reports })
}
