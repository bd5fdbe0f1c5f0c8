//! Multi-run commands and dataset utilities built on [`run_experiment`].

use std::fs;
use std::path::{Path, PathBuf};

use super::checkpoint::Checkpoint;
use super::config::{ExperimentConfig, Method};
use super::experiment::{run_experiment, RunOptions, StageError};
use super::output::{compare_csv, sweep_csv, Summary};
use crate::data::idx::{encode_idx_images, encode_idx_labels};
use crate::data::{load_idx, longtail_profile, GaussianMixture, LabeledDataset};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_parts, EvalReport};
use crate::numeric::Matrix;
use crate::rng::SeedStream;

fn stage<T>(name: &str, r: Result<T>) -> std::result::Result<T, StageError> {
    r.map_err(|error| StageError {
        stage: name.to_string(),
        error,
    })
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub rows: Vec<(String, Summary)>,
    pub table: String,
}

/// Runs each method with the same seed (hence the same data, partition,
/// initial model and client samples). Per-method outputs go to
/// `<output>/<index>_<method>/` when an output dir is given.
pub fn compare(base: &ExperimentConfig, methods: &[Method], output: Option<&Path>) -> std::result::Result<CompareOutcome, StageError> {
    if methods.len() < 2 {
        return stage("compare", Err(Error::invalid("compare needs at least two methods")));
    }
    let mut rows = Vec::with_capacity(methods.len());
    for (i, &method) in methods.iter().enumerate() {
        let mut cfg = base.clone();
        cfg.method = method;
        let opts = RunOptions {
            output_dir: output.map(|d| d.join(format!("{i}_{}", method.name()))),
            ..RunOptions::default()
        };
        let run = run_experiment(cfg, &opts).map_err(|e| StageError {
            stage: format!("{} {}", method.name(), e.stage),
            error: e.error,
        })?;
        rows.push((method.name().to_string(), run.summary));
    }
    let evals: Vec<(String, EvalReport)> = rows.iter().map(|(n, s)| (n.clone(), s.final_output.clone())).collect();
    let table = compare_csv(&evals);
    if let Some(dir) = output {
        stage("output", fs::create_dir_all(dir).map_err(Error::from))?;
        stage("output", fs::write(dir.join("compare.csv"), &table).map_err(Error::from))?;
    }
    Ok(CompareOutcome { rows, table })
}

/// Sorted, duplicate-free `m` values; duplicates are reported.
pub fn dedup_m_values(values: &[usize]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let before = sorted.len();
    sorted.dedup();
    if sorted.len() != before {
        log::warn!("duplicate m values removed: {values:?} -> {sorted:?}");
    }
    sorted
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<(usize, Summary)>,
    pub table: String,
}

/// One CReFF run per `m` on shared seeds.
pub fn sweep_m(base: &ExperimentConfig, values: &[usize], output: Option<&Path>) -> std::result::Result<SweepOutcome, StageError> {
    let values = dedup_m_values(values);
    if values.is_empty() {
        return stage("sweep-m", Err(Error::invalid("no m values given")));
    }
    let mut rows = Vec::with_capacity(values.len());
    for m in values {
        let mut cfg = base.clone();
        cfg.method = Method::Creff;
        cfg.m = m;
        let opts = RunOptions {
            output_dir: output.map(|d| d.join(format!("m_{m}"))),
            ..RunOptions::default()
        };
        let run = run_experiment(cfg, &opts).map_err(|e| StageError {
            stage: format!("m={m} {}", e.stage),
            error: e.error,
        })?;
        rows.push((m, run.summary));
    }
    let table = sweep_csv(&rows);
    if let Some(dir) = output {
        stage("output", fs::create_dir_all(dir).map_err(Error::from))?;
        stage("output", fs::write(dir.join("sweep_m.csv"), &table).map_err(Error::from))?;
    }
    Ok(SweepOutcome { rows, table })
}

/// File names written by [`gen_data`].
pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedPaths {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

/// Writes the config's Gaussian mixture as balanced IDX files: `n_max`
/// train and `n_test_per_class` test samples per class, each a
/// `1 × input_dim` image. Inputs are min-max scaled to `[0, 1]` with
/// bounds shared by both splits before 8-bit quantization.
pub fn gen_data(cfg: &ExperimentConfig, dir: &Path) -> Result<GeneratedPaths> {
    cfg.validate()?;
    let root = SeedStream::new(cfg.seed);
    let mixture = GaussianMixture::new(cfg.classes, cfg.input_dim, cfg.separation, cfg.noise_sigma, root.derive("data", 0))?;
    let train = mixture.sample(&vec![cfg.n_max; cfg.classes], root.derive("train-samples", 0))?;
    let test = mixture.sample(&vec![cfg.n_test_per_class; cfg.classes], root.derive("test-samples", 0))?;
    let all = train.inputs().as_slice().iter().chain(test.inputs().as_slice());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let scale = |m: &Matrix| m.map(|x| (x - lo) / span);

    fs::create_dir_all(dir)?;
    let paths = GeneratedPaths {
        train_images: dir.join(TRAIN_IMAGES),
        train_labels: dir.join(TRAIN_LABELS),
        test_images: dir.join(TEST_IMAGES),
        test_labels: dir.join(TEST_LABELS),
    };
    let write = |ds: &LabeledDataset, images: &Path, labels: &Path| -> Result<()> {
        fs::write(images, encode_idx_images(&scale(ds.inputs()), 1, cfg.input_dim)?)?;
        fs::write(labels, encode_idx_labels(ds.labels())?)?;
        Ok(())
    };
    write(&train, &paths.train_images, &paths.train_labels)?;
    write(&test, &paths.test_images, &paths.test_labels)?;
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CheckpointEval {
    pub round: usize,
    pub global: EvalReport,
    pub retrained: EvalReport,
}

/// Evaluates both models of a checkpoint on an IDX test set. Groups use
/// the long-tail training counts implied by the checkpoint's config.
pub fn eval_checkpoint(checkpoint: &Path, images: &Path, labels: &Path) -> std::result::Result<CheckpointEval, StageError> {
    let ckpt = stage("load checkpoint", Checkpoint::load(checkpoint))?;
    let cfg = &ckpt.config;
    let data = stage("load data", load_idx(images, labels).and_then(|d| d.with_classes(cfg.classes)))?;
    let profile = stage("evaluate", longtail_profile(cfg.classes, cfg.n_max, cfg.imbalance_factor))?;
    let eval = |classifier: &Matrix| {
        evaluate_parts(&ckpt.global.extractor, classifier, &data, profile.counts(), cfg.groups)
    };
    Ok(CheckpointEval {
        round: ckpt.next_round,
        global: stage("evaluate", eval(&ckpt.global.classifier))?,
        retrained: stage("evaluate", eval(&ckpt.retrained_classifier))?,
    })
}

