//! Builds data, clients and models from a config and drives rounds for
//! any method, with checkpoint and resume support.

use std::path::{Path, PathBuf};
use std::time::Instant;

use super::checkpoint::Checkpoint;
use super::config::{DataSource, ExperimentConfig, Method};
use super::output::{write_rounds_csv, write_summary, Summary};
use crate::creff::{creff_round, initial_bank, CreffConfig, CreffState, DualModel, FederatedFeatureBank};
use crate::data::{apply_profile, dirichlet_partition, load_idx, longtail_profile, GaussianMixture, LabeledDataset};
use crate::error::{Error, Result};
use crate::fl::{fedavg_round, sample_clients, tau_norm_classifier, Federation, LocalRule, LocalTraining};
use crate::metrics::privileged::collect_real_features;
use crate::metrics::{evaluate_parts, feature_dissimilarity, group_means, EvalReport, GroupStats, GroupThresholds, RoundReport};
use crate::numeric::{ModelDims, ModelParams};
use crate::rng::SeedStream;

/// Stage names reported alongside runtime failures.
#[derive(Debug)]
pub struct StageError {
    pub stage: String,
    pub error: Error,
}

impl std::fmt::Display for StageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} failed: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {}

trait Stage<T> {
    fn stage(self, name: impl Into<String>) -> std::result::Result<T, StageError>;
}

impl<T> Stage<T> for Result<T> {
    fn stage(self, name: impl Into<String>) -> std::result::Result<T, StageError> {
        self.map_err(|error| StageError {
            stage: name.into(),
            error,
        })
    }
}

/// Train/test data built from a config.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

/// Synthetic mixture (long-tailed train, balanced test) or IDX files
/// subsampled to the long-tail profile.
pub fn build_data(cfg: &ExperimentConfig) -> Result<ExperimentData> {
    let root = SeedStream::new(cfg.seed);
    let profile = longtail_profile(cfg.classes, cfg.n_max, cfg.imbalance_factor)?;
    match cfg.data {
        DataSource::Synthetic => {
            let mixture = GaussianMixture::new(
                cfg.classes,
                cfg.input_dim,
                cfg.separation,
                cfg.noise_sigma,
                root.derive("data", 0),
            )?;
            Ok(ExperimentData {
                train: mixture.sample(profile.counts(), root.derive("train-samples", 0))?,
                test: mixture.sample(&vec![cfg.n_test_per_class; cfg.classes], root.derive("test-samples", 0))?,
            })
        }
        DataSource::Idx => {
            let path = |p: &Option<PathBuf>| p.clone().ok_or_else(|| Error::invalid("idx paths missing"));
            let pool = load_idx(&path(&cfg.train_images)?, &path(&cfg.train_labels)?)?.with_classes(cfg.classes)?;
            let test = load_idx(&path(&cfg.test_images)?, &path(&cfg.test_labels)?)?.with_classes(cfg.classes)?;
            if pool.input_dim() != test.input_dim() {
                return Err(Error::invalid("train and test images differ in size"));
            }
            Ok(ExperimentData {
                train: apply_profile(&pool, &profile, root.derive("apply-profile", 0))?,
                test,
            })
        }
    }
}

/// Mutable run state; everything a checkpoint must capture.
#[derive(Debug, Clone, PartialEq)]
pub struct RunState {
    pub next_round: usize,
    pub model: DualModel,
    pub bank: FederatedFeatureBank,
    pub observed: Vec<bool>,
    pub history: Vec<RoundReport>,
}

/// A fully prepared experiment: data, clients and derived seeds.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    data: ExperimentData,
    federation: Federation,
    root: SeedStream,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let data = build_data(&config)?;
        let root = SeedStream::new(config.seed);
        let partition = dirichlet_partition(data.train.labels(), config.clients, config.alpha, root.derive("partition", 0))?;
        let federation = Federation::from_partition(&data.train, &partition, root.derive("federation", 0))?;
        Ok(Experiment {
            config,
            data,
            federation,
            root,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn data(&self) -> &ExperimentData {
        &self.data
    }

    pub fn federation(&self) -> &Federation {
        &self.federation
    }

    pub fn thresholds(&self) -> GroupThresholds {
        self.config.groups
    }

    pub fn train_counts(&self) -> &[usize] {
        self.data.train.class_counts()
    }

    pub fn model_dims(&self) -> ModelDims {
        ModelDims {
            input_dim: self.data.train.input_dim(),
            hidden: self.config.hidden.clone(),
            feature_dim: self.config.feature_dim,
            classes: self.config.classes,
        }
    }

    pub fn initial_model(&self) -> Result<ModelParams> {
        ModelParams::init(&self.model_dims(), &mut self.root.derive("model-init", 0).rng())
    }

    pub fn initial_state(&self) -> Result<RunState> {
        let global = self.initial_model()?;
        let m = if self.config.method == Method::Creff { self.config.m } else { 0 };
        let bank = initial_bank(self.config.classes, m, self.config.feature_dim, self.federation.stream())?;
        Ok(RunState {
            next_round: 0,
            model: DualModel::new(global),
            bank,
            observed: vec![false; self.config.classes],
            history: Vec::new(),
        })
    }

    pub fn local_training(&self) -> LocalTraining {
        LocalTraining {
            lr: self.config.lr_local,
            batch_size: self.config.batch_size,
            epochs: self.config.local_epochs,
        }
    }

    pub fn creff_config(&self) -> CreffConfig {
        CreffConfig {
            client_ratio: self.config.client_ratio,
            local: self.local_training(),
            feature_steps: self.config.feature_steps,
            feature_lr: self.config.lr_feature,
            retrain_steps: self.config.retrain_steps,
            retrain_lr: self.config.lr_retrain,
            retrain_init: self.config.retrain_init,
        }
    }

    fn eval(&self, model: &ModelParams, classifier: &crate::numeric::Matrix) -> Result<EvalReport> {
        evaluate_parts(&model.extractor, classifier, &self.data.test, self.train_counts(), self.config.groups)
    }

    /// Evaluation of the method's two models for the current state.
    pub fn evaluate_state(&self, state: &RunState) -> Result<(EvalReport, Option<EvalReport>)> {
        let global = &state.model.global;
        let g = self.eval(global, &global.classifier)?;
        let second = match self.config.method {
            Method::FedAvg | Method::FedProx => None,
            Method::TauNorm => Some(self.eval(global, &tau_norm_classifier(&global.classifier, self.config.tau)?)?),
            Method::Creff => Some(self.eval(global, &state.model.retrained_classifier)?),
        };
        Ok((g, second))
    }

    /// Runs the next round and appends its report to the history.
    pub fn step(&self, state: &mut RunState) -> Result<()> {
        let t = state.next_round;
        let started = Instant::now();
        let local = self.local_training();
        let mut match_loss_pre = GroupStats::default();
        let mut match_loss_post = GroupStats::default();
        let mut feat_dissim = GroupStats::default();
        match self.config.method {
            Method::FedAvg | Method::FedProx | Method::TauNorm => {
                let rule = match self.config.method {
                    Method::FedProx => LocalRule::Prox { mu: self.config.mu },
                    _ => LocalRule::Sgd,
                };
                let plan = sample_clients(self.federation.len(), self.config.client_ratio, self.federation.stream(), t)
                    .map_err(|e| e.in_round(t))?;
                let global = fedavg_round(&self.federation, &state.model.global, &plan, &local, rule)
                    .map_err(|e| e.in_round(t))?;
                state.model = DualModel::new(global);
            }
            Method::Creff => {
                // The bank is matched in the feature space of this round's
                // extractor, so diagnostics compare against it.
                let extractor = state.model.global.extractor.clone();
                let mut creff = CreffState {
                    model: state.model.clone(),
                    bank: std::mem::take(&mut state.bank),
                };
                let outcome = creff_round(&mut creff, &self.federation, t, &self.creff_config());
                state.model = creff.model;
                state.bank = creff.bank;
                let outcome = outcome?;
                for (seen, now) in state.observed.iter_mut().zip(&outcome.observed) {
                    *seen |= now;
                }
                let counts = self.train_counts();
                match_loss_pre = group_means(&outcome.match_loss_pre(), counts, self.config.groups);
                match_loss_post = group_means(&outcome.match_loss_post(), counts, self.config.groups);
                if !state.bank.is_empty() {
                    let real = collect_real_features(&extractor, &self.data.train)?;
                    feat_dissim = feature_dissimilarity(&state.bank, &real, counts, self.config.groups)?;
                }
            }
        }
        let (global, retrained) = self.evaluate_state(state)?;
        let stale_classes = if self.config.method == Method::Creff {
            state.observed.iter().filter(|s| !**s).count()
        } else {
            0
        };
        state.history.push(RoundReport {
            round: t,
            global,
            retrained,
            match_loss_pre,
            match_loss_post,
            feat_dissim,
            stale_classes,
            wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        state.next_round += 1;
        Ok(())
    }

    pub fn checkpoint(&self, state: &RunState) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            seed_stream: self.root,
            next_round: state.next_round,
            global: state.model.global.clone(),
            retrained_classifier: state.model.retrained_classifier.clone(),
            bank: state.bank.clone(),
            observed: state.observed.clone(),
            history: state.history.clone(),
        }
    }

    /// Restores run state from a checkpoint taken on this experiment.
    pub fn restore(&self, ckpt: Checkpoint) -> Result<RunState> {
        if ckpt.config != self.config || ckpt.seed_stream != self.root {
            return Err(Error::invalid("checkpoint was taken with a different config"));
        }
        if ckpt.history.len() != ckpt.next_round || ckpt.observed.len() != self.config.classes {
            return Err(Error::invalid("checkpoint history is inconsistent with its round index"));
        }
        if !ckpt.global.same_shape(&self.initial_model()?) {
            return Err(Error::invalid("checkpoint model shape does not match the config"));
        }
        Ok(RunState {
            next_round: ckpt.next_round,
            model: DualModel {
                global: ckpt.global,
                retrained_classifier: ckpt.retrained_classifier,
            },
            bank: ckpt.bank,
            observed: ckpt.observed,
            history: ckpt.history,
        })
    }

    pub fn summary(&self, state: &RunState) -> Result<Summary> {
        let (global, second) = self.evaluate_state(state)?;
        Ok(Summary::new(&self.config, state.next_round, global, second))
    }
}

/// Options for [`run_experiment`].
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Write rounds.csv, summary.json and checkpoints here.
    pub output_dir: Option<PathBuf>,
    pub resume: Option<PathBuf>,
    /// Stop after this many completed rounds (simulated interruption).
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: RunState,
    pub summary: Summary,
}

pub fn checkpoint_path(dir: &Path, round: usize) -> PathBuf {
    dir.join("checkpoints").join(format!("round_{round:04}.bin"))
}

/// Runs (or resumes) a configured experiment to `config.rounds` rounds.
pub fn run_experiment(config: ExperimentConfig, opts: &RunOptions) -> std::result::Result<RunOutcome, StageError> {
    let experiment = Experiment::prepare(config).stage("prepare")?;
    run_prepared(&experiment, opts)
}

pub fn run_prepared(experiment: &Experiment, opts: &RunOptions) -> std::result::Result<RunOutcome, StageError> {
    let cfg = experiment.config();
    let mut state = match &opts.resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path).stage("load checkpoint")?;
            experiment.restore(ckpt).stage("restore checkpoint")?
        }
        None => experiment.initial_state().stage("init")?,
    };
    let out = opts.output_dir.as_deref();
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(Error::from).stage("output")?;
    }
    let target = opts.stop_after.map_or(cfg.rounds, |s| s.min(cfg.rounds));
    while state.next_round < target {
        let t = state.next_round;
        experiment.step(&mut state).stage(format!("round {t}"))?;
        if let Some(dir) = out {
            write_rounds_csv(&dir.join("rounds.csv"), &state.history).stage("output")?;
            let done = state.next_round;
            let periodic = cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0;
            if periodic || done == target {
                let ckpt = experiment.checkpoint(&state);
                ckpt.save(&checkpoint_path(dir, done)).stage("checkpoint")?;
                ckpt.save(&dir.join("checkpoint.bin")).stage("checkpoint")?;
            }
        }
    }
    let summary = experiment.summary(&state).stage("evaluate")?;
    if let Some(dir) = out {
        write_rounds_csv(&dir.join("rounds.csv"), &state.history).stage("output")?;
        write_summary(&dir.join("summary.json"), &summary).stage("output")?;
    }
    Ok(RunOutcome { state, summary })
}
