//! Config parsing, run outputs, checkpoints and resume.

use std::fs;
use std::path::Path;

use creff::error::{CheckpointError, ConfigError, Error};
use creff::harness::checkpoint::{MAGIC, VERSION};
use creff::harness::{
    compare, dedup_m_values, eval_checkpoint, gen_data, parse_config_str, run_experiment, sweep_m, Checkpoint,
    ExperimentConfig, Method, RunOptions, ROUNDS_HEADER,
};
use proptest::prelude::*;

fn small(extra: &[(&str, &str)]) -> ExperimentConfig {
    let mut overrides: Vec<(String, String)> = [
        ("n_max", "120"),
        ("IF", "10"),
        ("K", "6"),
        ("client_ratio", "0.5"),
        ("m", "4"),
        ("I", "10"),
        ("J", "20"),
        ("T", "4"),
        ("n_test_per_class", "20"),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    overrides.extend(extra.iter().map(|(k, v)| (k.to_string(), v.to_string())));
    parse_config_str("", &overrides).unwrap()
}

fn run_to(cfg: ExperimentConfig, dir: &Path) {
    let opts = RunOptions {
        output_dir: Some(dir.to_path_buf()),
        ..RunOptions::default()
    };
    run_experiment(cfg, &opts).unwrap();
}

#[test]
fn rounds_header_is_stable() {
    assert_eq!(
        ROUNDS_HEADER,
        "round,acc_global,acc_retrained,acc_many,acc_medium,acc_few,match_loss_many,match_loss_medium,\
match_loss_few,feat_dissim_many,feat_dissim_medium,feat_dissim_few"
    );
}

#[test]
fn single_round_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    run_to(small(&[("T", "1")]), dir.path());
    let csv = fs::read_to_string(dir.path().join("rounds.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], ROUNDS_HEADER);
    assert_eq!(lines[1].split(',').count(), 12);
    assert!(dir.path().join("summary.json").exists());
    assert!(dir.path().join("checkpoint.bin").exists());
    assert!(dir.path().join("checkpoints/round_0001.bin").exists());
}

#[test]
fn fedavg_rows_leave_creff_columns_empty() {
    let dir = tempfile::tempdir().unwrap();
    run_to(small(&[("T", "1"), ("method", "fedavg")]), dir.path());
    let csv = fs::read_to_string(dir.path().join("rounds.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[2], "");
    assert!(row[6..].iter().all(|c| c.is_empty()));
}

#[test]
fn duplicate_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_to(small(&[]), a.path());
    run_to(small(&[]), b.path());
    for file in ["rounds.csv", "summary.json", "checkpoint.bin"] {
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{file}");
    }
    let c = tempfile::tempdir().unwrap();
    run_to(small(&[("seed", "1")]), c.path());
    assert_ne!(fs::read(a.path().join("rounds.csv")).unwrap(), fs::read(c.path().join("rounds.csv")).unwrap());
}

#[test]
fn interrupted_and_resumed_run_matches_uninterrupted() {
    for method in ["creff", "fedprox", "taunorm"] {
        let cfg = small(&[("T", "6"), ("method", method)]);
        let full = tempfile::tempdir().unwrap();
        run_to(cfg.clone(), full.path());

        let part = tempfile::tempdir().unwrap();
        let first = RunOptions {
            output_dir: Some(part.path().to_path_buf()),
            stop_after: Some(3),
            ..RunOptions::default()
        };
        assert_eq!(run_experiment(cfg.clone(), &first).unwrap().state.next_round, 3);
        let resumed = RunOptions {
            output_dir: Some(part.path().to_path_buf()),
            resume: Some(part.path().join("checkpoint.bin")),
            ..RunOptions::default()
        };
        run_experiment(cfg, &resumed).unwrap();
        for file in ["rounds.csv", "summary.json", "checkpoint.bin"] {
            assert_eq!(
                fs::read(full.path().join(file)).unwrap(),
                fs::read(part.path().join(file)).unwrap(),
                "{method}: {file}"
            );
        }
    }
}

#[test]
fn resume_rejects_a_checkpoint_from_another_config() {
    let dir = tempfile::tempdir().unwrap();
    run_to(small(&[("T", "1")]), dir.path());
    let opts = RunOptions {
        resume: Some(dir.path().join("checkpoint.bin")),
        ..RunOptions::default()
    };
    let err = run_experiment(small(&[("T", "2"), ("seed", "5")]), &opts).unwrap_err();
    assert_eq!(err.stage, "restore checkpoint");
}

fn sample_checkpoint() -> Checkpoint {
    let dir = tempfile::tempdir().unwrap();
    run_to(small(&[("T", "2")]), dir.path());
    Checkpoint::load(&dir.path().join("checkpoint.bin")).unwrap()
}

#[test]
fn checkpoint_round_trips_field_by_field() {
    let ckpt = sample_checkpoint();
    let back = Checkpoint::decode(&ckpt.encode()).unwrap();
    assert_eq!(back.config, ckpt.config);
    assert_eq!(back.seed_stream, ckpt.seed_stream);
    assert_eq!(back.next_round, ckpt.next_round);
    assert_eq!(back.global, ckpt.global);
    assert_eq!(back.retrained_classifier, ckpt.retrained_classifier);
    assert_eq!(back.bank, ckpt.bank);
    assert_eq!(back.observed, ckpt.observed);
    assert_eq!(back.history, ckpt.history);
    assert_eq!(back, ckpt);
}

#[test]
fn checkpoint_rejects_bad_magic_and_version() {
    let bytes = sample_checkpoint().encode();
    assert_eq!(&bytes[..4], MAGIC);

    let mut bad = bytes.clone();
    bad[..4].copy_from_slice(b"XRFF");
    assert!(matches!(Checkpoint::decode(&bad), Err(CheckpointError::BadMagic { .. })));

    let mut newer = bytes.clone();
    newer[4..6].copy_from_slice(&(VERSION + 1).to_le_bytes());
    let err = Checkpoint::decode(&newer).unwrap_err();
    assert_eq!(err, CheckpointError::UnsupportedVersion { found: VERSION + 1, supported: VERSION });
    let msg = err.to_string();
    assert!(msg.contains(&(VERSION + 1).to_string()) && msg.contains(&VERSION.to_string()), "{msg}");
}

#[test]
fn every_truncation_is_a_named_error() {
    let bytes = sample_checkpoint().encode();
    for len in (0..bytes.len()).step_by(7).chain([bytes.len() - 1]) {
        assert!(Checkpoint::decode(&bytes[..len]).is_err(), "prefix {len} decoded");
    }
    let mut longer = bytes.clone();
    longer.push(0);
    assert!(Checkpoint::decode(&longer).is_err());
}

#[test]
fn config_errors_name_key_and_constraint() {
    let err = parse_config_str("IF = 0.5\n", &[]).unwrap_err();
    assert!(matches!(err, Error::Config(ConfigError::Constraint { key: "IF", constraint: "IF ≥ 1" })));
    assert!(err.to_string().contains("IF ≥ 1"));
    assert!(matches!(parse_config_str("bogus = 1\n", &[]), Err(Error::Config(ConfigError::UnknownKey { .. }))));
    assert!(matches!(parse_config_str("K = many\n", &[]), Err(Error::Config(ConfigError::TypeMismatch { .. }))));
    assert!(matches!(parse_config_str("client_ratio = 1.5\n", &[]), Err(Error::Config(ConfigError::Constraint { .. }))));
}

#[test]
fn overrides_beat_file_values() {
    let cfg = parse_config_str("# comment\nm = 7\nT = 3 # trailing\n", &[("m".into(), "0".into())]).unwrap();
    assert_eq!((cfg.m, cfg.rounds), (0, 3));
    let full = parse_config_str("", &[("preset".into(), "full".into())]).unwrap();
    assert_eq!(
        (full.rounds, full.clients, full.client_ratio, full.batch_size, full.m, full.feature_steps, full.retrain_steps),
        (200, 20, 0.4, 32, 100, 100, 300)
    );
    assert_eq!((full.lr_local, full.lr_feature, full.lr_retrain), (0.1, 0.1, 0.1));
}

fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
    (
        (prop_oneof![Just("fedavg"), Just("fedprox"), Just("taunorm"), Just("creff")], 2usize..50, 1usize..64, 1.0f64..100.0),
        (0.01f64..10.0, 1usize..40, 0.01f64..1.0, 0usize..300),
        (proptest::collection::vec(1usize..128, 0..4), 1usize..64, 1e-4f64..2.0, 1e-4f64..20.0),
        (0usize..200, 0usize..200, 0usize..500, any::<u64>(), prop_oneof![Just("warm"), Just("random")]),
    )
        .prop_map(|((method, c, dim, imb), (alpha, k, ratio, t), (hidden, d, lr, lrf), (m, i, j, seed, init))| {
            let mut cfg = ExperimentConfig::desk();
            cfg.set("method", method).unwrap();
            cfg.classes = c;
            cfg.input_dim = dim;
            cfg.imbalance_factor = imb;
            cfg.n_max = 500;
            cfg.alpha = alpha;
            cfg.clients = k;
            cfg.client_ratio = ratio;
            cfg.rounds = t;
            cfg.hidden = hidden;
            cfg.feature_dim = d;
            cfg.lr_local = lr;
            cfg.lr_feature = lrf;
            cfg.m = m;
            cfg.feature_steps = i;
            cfg.retrain_steps = j;
            cfg.seed = seed;
            cfg.set("retrain_init", init).unwrap();
            cfg
        })
}

proptest! {
    #[test]
    fn config_text_round_trips(cfg in arb_config()) {
        prop_assume!(cfg.validate().is_ok());
        let back = parse_config_str(&cfg.to_text(), &[]).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn compare_identical_methods_has_zero_delta() {
    let out = compare(&small(&[]), &[Method::FedAvg, Method::FedAvg], None).unwrap();
    assert_eq!(out.rows.len(), 2);
    let row: Vec<&str> = out.table.lines().nth(2).unwrap().split(',').collect();
    for cell in &row[5..] {
        if !cell.is_empty() {
            assert!(cell.parse::<f64>().unwrap().abs() <= 1e-12, "{cell}");
        }
    }
    assert!(compare(&small(&[]), &[Method::Creff], None).is_err());
}

#[test]
fn sweep_dedups_and_m_zero_matches_fedavg() {
    assert_eq!(dedup_m_values(&[10, 0, 10, 1]), vec![0, 1, 10]);
    let dir = tempfile::tempdir().unwrap();
    let sweep = sweep_m(&small(&[]), &[0, 0], Some(dir.path())).unwrap();
    assert_eq!(sweep.rows.len(), 1);
    let fedavg = run_experiment(small(&[("method", "fedavg")]), &RunOptions::default()).unwrap();
    assert_eq!(sweep.rows[0].1.final_output, fedavg.summary.final_global);
    assert_eq!(sweep.rows[0].1.final_global, fedavg.summary.final_global);
    let csv = fs::read_to_string(dir.path().join("sweep_m.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn generated_idx_data_drives_a_run_and_checkpoint_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(&[]);
    let paths = gen_data(&cfg, dir.path()).unwrap();
    let p = |x: &Path| x.display().to_string();
    let idx = small(&[
        ("data", "idx"),
        ("train_images", &p(&paths.train_images)),
        ("train_labels", &p(&paths.train_labels)),
        ("test_images", &p(&paths.test_images)),
        ("test_labels", &p(&paths.test_labels)),
        ("T", "2"),
    ]);
    let out = dir.path().join("run");
    run_to(idx.clone(), &out);
    let eval = eval_checkpoint(&out.join("checkpoint.bin"), &paths.test_images, &paths.test_labels).unwrap();
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(eval.round, 2);
    assert_eq!(summary["final_global"]["overall_acc"].as_f64(), Some(eval.global.overall_acc));
    assert_eq!(summary["final_retrained"]["overall_acc"].as_f64(), Some(eval.retrained.overall_acc));
}
