//! Flat `key = value` experiment configuration.
//!
//! One pair per line, `#` starts a comment. A `preset` key (or override)
//! selects the defaults; file values apply next and overrides last.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::creff::RetrainInit;
use crate::error::{ConfigError, Result};
use crate::metrics::GroupThresholds;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    FedAvg,
    FedProx,
    TauNorm,
    Creff,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::FedAvg => "fedavg",
            Method::FedProx => "fedprox",
            Method::TauNorm => "taunorm",
            Method::Creff => "creff",
        }
    }
}

impl FromStr for Method {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "fedavg" => Ok(Method::FedAvg),
            "fedprox" => Ok(Method::FedProx),
            "taunorm" | "fedavg+taunorm" => Ok(Method::TauNorm),
            "creff" => Ok(Method::Creff),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    Synthetic,
    Idx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Full,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Desk => "desk",
            Preset::Full => "full",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub method: Method,
    pub data: DataSource,
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub classes: usize,
    pub input_dim: usize,
    pub n_max: usize,
    pub imbalance_factor: f64,
    pub alpha: f64,
    pub clients: usize,
    pub client_ratio: f64,
    pub rounds: usize,
    pub hidden: Vec<usize>,
    pub feature_dim: usize,
    pub lr_local: f64,
    pub lr_feature: f64,
    pub lr_retrain: f64,
    pub batch_size: usize,
    pub local_epochs: usize,
    pub mu: f64,
    pub tau: f64,
    pub m: usize,
    pub feature_steps: usize,
    pub retrain_steps: usize,
    pub retrain_init: RetrainInit,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub separation: f64,
    pub noise_sigma: f64,
    pub n_test_per_class: usize,
    pub groups: GroupThresholds,
    pub checkpoint_every: usize,
}

impl ExperimentConfig {
    /// Small enough for CI while exercising every protocol path.
    pub fn desk() -> Self {
        ExperimentConfig {
            preset: Preset::Desk,
            method: Method::Creff,
            data: DataSource::Synthetic,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            classes: 10,
            input_dim: 32,
            n_max: 500,
            imbalance_factor: 100.0,
            alpha: 0.5,
            clients: 20,
            client_ratio: 0.4,
            rounds: 30,
            hidden: vec![64, 32],
            feature_dim: 32,
            lr_local: 0.1,
            // Matching gradients carry a 1/(mC) factor; at 0.1 the bank is
            // still far from matched after 20 desk rounds.
            lr_feature: 1.0,
            lr_retrain: 0.1,
            batch_size: 32,
            local_epochs: 2,
            mu: 0.01,
            tau: 1.0,
            m: 20,
            feature_steps: 50,
            retrain_steps: 100,
            retrain_init: RetrainInit::Warm,
            seed: 0,
            output_dir: PathBuf::from("out"),
            separation: 3.0,
            noise_sigma: 0.6,
            n_test_per_class: 100,
            groups: GroupThresholds::IMAGENET_LT,
            checkpoint_every: 1,
        }
    }

    /// Full-length schedule: 200 rounds, 20 clients at 40%, batch 32,
    /// m = 100, I = 100, J = 300, every learning rate 0.1.
    pub fn full() -> Self {
        ExperimentConfig {
            preset: Preset::Full,
            n_max: 5000,
            rounds: 200,
            m: 100,
            feature_steps: 100,
            retrain_steps: 300,
            lr_local: 0.1,
            lr_feature: 0.1,
            lr_retrain: 0.1,
            ..ExperimentConfig::desk()
        }
    }

    pub fn from_preset(preset: Preset) -> Self {
        match preset {
            Preset::Desk => Self::desk(),
            Preset::Full => Self::full(),
        }
    }

    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        fn check(ok: bool, key: &'static str, constraint: &'static str) -> std::result::Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Constraint { key, constraint })
            }
        }
        check(self.classes >= 2, "C", "C ≥ 2")?;
        check(self.input_dim >= 1, "input_dim", "input_dim ≥ 1")?;
        check(self.n_max >= 1, "n_max", "n_max ≥ 1")?;
        check(self.imbalance_factor >= 1.0 && self.imbalance_factor.is_finite(), "IF", "IF ≥ 1")?;
        check(self.n_max as f64 >= self.imbalance_factor, "n_max", "n_max ≥ IF")?;
        check(self.alpha > 0.0 && self.alpha.is_finite(), "alpha", "alpha > 0")?;
        check(self.clients >= 1, "K", "K ≥ 1")?;
        check(self.client_ratio > 0.0 && self.client_ratio <= 1.0, "client_ratio", "client_ratio ∈ (0, 1]")?;
        check(self.feature_dim >= 1, "d", "d ≥ 1")?;
        check(!self.hidden.contains(&0), "hidden", "hidden widths ≥ 1")?;
        check(self.lr_local > 0.0 && self.lr_local.is_finite(), "lr_local", "lr_local > 0")?;
        check(self.lr_feature > 0.0 && self.lr_feature.is_finite(), "lr_feature", "lr_feature > 0")?;
        check(self.lr_retrain > 0.0 && self.lr_retrain.is_finite(), "lr_retrain", "lr_retrain > 0")?;
        check(self.batch_size >= 1, "batch_size", "batch_size ≥ 1")?;
        check(self.local_epochs >= 1, "local_epochs", "local_epochs ≥ 1")?;
        check(self.mu >= 0.0 && self.mu.is_finite(), "mu", "mu ≥ 0")?;
        check(self.tau >= 0.0 && self.tau.is_finite(), "tau", "tau ≥ 0")?;
        check(self.separation > 0.0 && self.separation.is_finite(), "separation", "separation > 0")?;
        check(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite(), "noise_sigma", "noise_sigma ≥ 0")?;
        check(self.n_test_per_class >= 1, "n_test_per_class", "n_test_per_class ≥ 1")?;
        check(self.classes <= 256 || self.data == DataSource::Synthetic, "C", "C ≤ 256 for IDX data")?;
        if self.data == DataSource::Idx {
            check(
                self.train_images.is_some()
                    && self.train_labels.is_some()
                    && self.test_images.is_some()
                    && self.test_labels.is_some(),
                "data",
                "idx data needs train_images, train_labels, test_images and test_labels",
            )?;
        }
        Ok(())
    }

    /// Canonical text form; parsing it back yields an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, value) in self.entries() {
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    /// Every key with its canonical value text, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        vec![
            ("preset", self.preset.name().to_string()),
            ("method", self.method.name().to_string()),
            (
                "data",
                match self.data {
                    DataSource::Synthetic => "synthetic",
                    DataSource::Idx => "idx",
                }
                .to_string(),
            ),
            ("train_images", path(&self.train_images)),
            ("train_labels", path(&self.train_labels)),
            ("test_images", path(&self.test_images)),
            ("test_labels", path(&self.test_labels)),
            ("C", self.classes.to_string()),
            ("input_dim", self.input_dim.to_string()),
            ("n_max", self.n_max.to_string()),
            ("IF", self.imbalance_factor.to_string()),
            ("alpha", self.alpha.to_string()),
            ("K", self.clients.to_string()),
            ("client_ratio", self.client_ratio.to_string()),
            ("T", self.rounds.to_string()),
            (
                "hidden",
                self.hidden.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
            ),
            ("d", self.feature_dim.to_string()),
            ("lr_local", self.lr_local.to_string()),
            ("lr_feature", self.lr_feature.to_string()),
            ("lr_retrain", self.lr_retrain.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("local_epochs", self.local_epochs.to_string()),
            ("mu", self.mu.to_string()),
            ("tau", self.tau.to_string()),
            ("m", self.m.to_string()),
            ("I", self.feature_steps.to_string()),
            ("J", self.retrain_steps.to_string()),
            (
                "retrain_init",
                match self.retrain_init {
                    RetrainInit::Warm => "warm",
                    RetrainInit::Random => "random",
                }
                .to_string(),
            ),
            ("seed", self.seed.to_string()),
            ("output_dir", self.output_dir.display().to_string()),
            ("separation", self.separation.to_string()),
            ("noise_sigma", self.noise_sigma.to_string()),
            ("n_test_per_class", self.n_test_per_class.to_string()),
            ("groups", format!("{},{}", self.groups.hi, self.groups.lo)),
            ("checkpoint_every", self.checkpoint_every.to_string()),
        ]
    }

    /// Applies one `key = value` pair.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), ConfigError> {
        let key = canonical_key(key).ok_or_else(|| ConfigError::UnknownKey { key: key.to_string() })?;
        let value = value.trim();
        match key {
            "preset" => self.preset = parse_preset(value)?,
            "method" => self.method = value.parse().map_err(|_| mismatch(key, value, "fedavg|fedprox|taunorm|creff"))?,
            "data" => {
                self.data = match value {
                    "synthetic" => DataSource::Synthetic,
                    "idx" => DataSource::Idx,
                    _ => return Err(mismatch(key, value, "synthetic|idx")),
                }
            }
            "train_images" => self.train_images = opt_path(value),
            "train_labels" => self.train_labels = opt_path(value),
            "test_images" => self.test_images = opt_path(value),
            "test_labels" => self.test_labels = opt_path(value),
            "C" => self.classes = num(key, value)?,
            "input_dim" => self.input_dim = num(key, value)?,
            "n_max" => self.n_max = num(key, value)?,
            "IF" => self.imbalance_factor = real(key, value)?,
            "alpha" => self.alpha = real(key, value)?,
            "K" => self.clients = num(key, value)?,
            "client_ratio" => self.client_ratio = real(key, value)?,
            "T" => self.rounds = num(key, value)?,
            "hidden" => {
                self.hidden = if value.is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|w| w.trim().parse().map_err(|_| mismatch(key, value, "comma-separated counts")))
                        .collect::<std::result::Result<_, _>>()?
                }
            }
            "d" => self.feature_dim = num(key, value)?,
            "lr_local" => self.lr_local = real(key, value)?,
            "lr_feature" => self.lr_feature = real(key, value)?,
            "lr_retrain" => self.lr_retrain = real(key, value)?,
            "lr" => {
                let lr = real(key, value)?;
                self.lr_local = lr;
                self.lr_feature = lr;
                self.lr_retrain = lr;
            }
            "batch_size" => self.batch_size = num(key, value)?,
            "local_epochs" => self.local_epochs = num(key, value)?,
            "mu" => self.mu = real(key, value)?,
            "tau" => self.tau = real(key, value)?,
            "m" => self.m = num(key, value)?,
            "I" => self.feature_steps = num(key, value)?,
            "J" => self.retrain_steps = num(key, value)?,
            "retrain_init" => {
                self.retrain_init = match value {
                    "warm" => RetrainInit::Warm,
                    "random" => RetrainInit::Random,
                    _ => return Err(mismatch(key, value, "warm|random")),
                }
            }
            "seed" => self.seed = value.parse().map_err(|_| mismatch(key, value, "unsigned integer"))?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "separation" => self.separation = real(key, value)?,
            "noise_sigma" => self.noise_sigma = real(key, value)?,
            "n_test_per_class" => self.n_test_per_class = num(key, value)?,
            "groups" => self.groups = parse_groups(value)?,
            "checkpoint_every" => self.checkpoint_every = num(key, value)?,
            _ => unreachable!("canonical_key only returns handled keys"),
        }
        Ok(())
    }
}

const KEYS: &[&str] = &[
    "preset", "method", "data", "train_images", "train_labels", "test_images", "test_labels", "C",
    "input_dim", "n_max", "IF", "alpha", "K", "client_ratio", "T", "hidden", "d", "lr_local",
    "lr_feature", "lr_retrain", "lr", "batch_size", "local_epochs", "mu", "tau", "m", "I", "J",
    "retrain_init", "seed", "output_dir", "separation", "noise_sigma", "n_test_per_class", "groups",
    "checkpoint_every",
];

fn canonical_key(key: &str) -> Option<&'static str> {
    let alias = match key {
        "classes" => "C",
        "imbalance_factor" => "IF",
        "clients" => "K",
        "rounds" => "T",
        "feature_dim" => "d",
        "feature_steps" => "I",
        "retrain_steps" => "J",
        "master_seed" => "seed",
        other => other,
    };
    KEYS.iter().copied().find(|&k| k == alias)
}

fn mismatch(key: &str, value: &str, expected: &'static str) -> ConfigError {
    ConfigError::TypeMismatch {
        key: key.to_string(),
        value: value.to_string(),
        expected,
    }
}

fn num(key: &str, value: &str) -> std::result::Result<usize, ConfigError> {
    value.parse().map_err(|_| mismatch(key, value, "non-negative integer"))
}

fn real(key: &str, value: &str) -> std::result::Result<f64, ConfigError> {
    match value.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(mismatch(key, value, "finite real number")),
    }
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn parse_preset(value: &str) -> std::result::Result<Preset, ConfigError> {
    match value {
        "desk" | "desk_scale" => Ok(Preset::Desk),
        "full" => Ok(Preset::Full),
        _ => Err(mismatch("preset", value, "desk|full")),
    }
}

fn parse_groups(value: &str) -> std::result::Result<GroupThresholds, ConfigError> {
    if let Some(t) = GroupThresholds::preset(value) {
        return Ok(t);
    }
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    let bad = || mismatch("groups", value, "imagenet-lt|cifar-lt-fig3|hi,lo");
    if parts.len() != 2 {
        return Err(bad());
    }
    let hi = parts[0].parse().map_err(|_| bad())?;
    let lo = parts[1].parse().map_err(|_| bad())?;
    GroupThresholds::new(hi, lo).map_err(|_| ConfigError::Constraint {
        key: "groups",
        constraint: "hi > lo > 0",
    })
}

/// Splits config text into `(line number, key, value)` triples.
pub fn parse_pairs(text: &str) -> std::result::Result<Vec<(usize, String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            text: raw.to_string(),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            });
        }
        out.push((i + 1, key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Parses config text plus `key=value` overrides into a validated config.
pub fn parse_config_str(text: &str, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let pairs = parse_pairs(text)?;
    let preset_value = overrides
        .iter()
        .rev()
        .find(|(k, _)| k == "preset")
        .map(|(_, v)| v.as_str())
        .or_else(|| pairs.iter().rev().find(|(_, k, _)| k == "preset").map(|(_, _, v)| v.as_str()));
    let preset = match preset_value {
        Some(v) => parse_preset(v.trim())?,
        None => Preset::Desk,
    };
    let mut cfg = ExperimentConfig::from_preset(preset);
    for (_, key, value) in &pairs {
        cfg.set(key, value)?;
    }
    for (key, value) in overrides {
        cfg.set(key, value)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a config file (if given) and applies overrides.
pub fn parse_config(path: Option<&std::path::Path>, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)?,
        None => String::new(),
    };
    parse_config_str(&text, overrides)
}

/// Splits a `key=value` override.
pub fn parse_override(arg: &str) -> std::result::Result<(String, String), ConfigError> {
    let (k, v) = arg.split_once('=').ok_or_else(|| ConfigError::Syntax {
        line: 0,
        text: arg.to_string(),
    })?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn full_preset_values() {
        let cfg = parse_config_str("preset = full\n", &[]).unwrap();
        assert_eq!(cfg.rounds, 200);
        assert_eq!(cfg.clients, 20);
        assert_eq!(cfg.client_ratio, 0.4);
        assert_eq!(cfg.batch_size, 32);
        assert_eq!(cfg.m, 100);
        assert_eq!(cfg.feature_steps, 100);
        assert_eq!(cfg.retrain_steps, 300);
        assert_eq!((cfg.lr_local, cfg.lr_feature, cfg.lr_retrain), (0.1, 0.1, 0.1));
        let via_override = parse_config_str("", &[("preset".into(), "full".into())]).unwrap();
        assert_eq!(via_override, cfg);
    }

    #[test]
    fn desk_preset_values() {
        let cfg = parse_config_str("", &[]).unwrap();
        assert_eq!(cfg, ExperimentConfig::desk());
        assert_eq!((cfg.classes, cfg.input_dim, cfg.feature_dim), (10, 32, 32));
        assert_eq!(cfg.hidden, vec![64, 32]);
        assert_eq!((cfg.n_max, cfg.clients, cfg.rounds), (500, 20, 30));
        assert_eq!((cfg.m, cfg.feature_steps, cfg.retrain_steps), (20, 50, 100));
    }

    #[test]
    fn imbalance_factor_constraint() {
        let err = parse_config_str("IF = 0.5", &[]).unwrap_err();
        match err {
            Error::Config(ConfigError::Constraint { key, constraint }) => {
                assert_eq!(key, "IF");
                assert_eq!(constraint, "IF ≥ 1");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn overrides_win_and_m_zero_is_allowed() {
        let cfg = parse_config_str("method = creff\nm = 5 # comment\n", &[("m".into(), "0".into())]).unwrap();
        assert_eq!(cfg.m, 0);
        assert_eq!(cfg.method, Method::Creff);
    }

    #[test]
    fn unknown_key_and_type_errors() {
        assert!(matches!(
            parse_config_str("bogus = 1", &[]),
            Err(Error::Config(ConfigError::UnknownKey { .. }))
        ));
        assert!(matches!(
            parse_config_str("K = many", &[]),
            Err(Error::Config(ConfigError::TypeMismatch { .. }))
        ));
        assert!(matches!(
            parse_config_str("just words", &[]),
            Err(Error::Config(ConfigError::Syntax { line: 1, .. }))
        ));
        assert!(matches!(
            parse_config_str("client_ratio = 0", &[]),
            Err(Error::Config(ConfigError::Constraint { key: "client_ratio", .. }))
        ));
    }

    #[test]
    fn aliases_and_group_presets() {
        let cfg = parse_config_str("rounds = 3\nimbalance_factor = 10\ngroups = cifar-lt-fig3", &[]).unwrap();
        assert_eq!(cfg.rounds, 3);
        assert_eq!(cfg.imbalance_factor, 10.0);
        assert_eq!(cfg.groups, GroupThresholds::CIFAR_LT_FIG3);
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = ExperimentConfig::full();
        cfg.alpha = 0.123456789;
        cfg.retrain_init = RetrainInit::Random;
        cfg.train_images = Some(PathBuf::from("a/b.idx"));
        assert_eq!(parse_config_str(&cfg.to_text(), &[]).unwrap(), cfg);
    }
}
