//! Replays the checked-in fuzz seeds through the same properties the fuzz
//! targets assert, so the corpus stays meaningful on stable toolchains.

use std::fs;
use std::path::PathBuf;

use creff::data::decode_idx;
use creff::data::idx::{parse_idx_images, parse_idx_labels};
use creff::harness::{parse_config_str, Checkpoint};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|entry| {
            let path = entry.unwrap().path();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            (name, fs::read(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn idx_image_seeds() {
    let mut accepted = 0;
    for (name, data) in seeds("idx_images") {
        if let Ok(images) = parse_idx_images(&data) {
            assert_eq!(images.pixels.len(), images.count * images.rows * images.cols, "{name}");
            accepted += 1;
        }
    }
    assert!(accepted > 0);
}

#[test]
fn idx_label_seeds() {
    let mut accepted = 0;
    for (name, data) in seeds("idx_labels") {
        if let Ok(labels) = parse_idx_labels(&data) {
            assert!(labels.len() <= data.len(), "{name}");
            accepted += 1;
        }
    }
    assert!(accepted > 0);
}

#[test]
fn idx_pair_seeds() {
    for (name, data) in seeds("idx_pair") {
        let Some((&split, rest)) = data.split_first() else { continue };
        let at = (split as usize * rest.len()) / 255;
        let (images, labels) = rest.split_at(at.min(rest.len()));
        if let Ok(ds) = decode_idx(images, labels) {
            assert_eq!(ds.len(), ds.labels().len(), "{name}");
            assert!(ds.inputs().as_slice().iter().all(|x| (0.0..=1.0).contains(x)), "{name}");
        }
    }
}

#[test]
fn checkpoint_seeds() {
    let mut accepted = 0;
    for (name, data) in seeds("checkpoint") {
        if let Ok(ckpt) = Checkpoint::decode(&data) {
            let again = Checkpoint::decode(&ckpt.encode()).unwrap();
            assert_eq!(again, ckpt, "{name}");
            accepted += 1;
        }
    }
    assert!(accepted > 0);
}

#[test]
fn config_seeds() {
    let mut accepted = 0;
    for (name, data) in seeds("config") {
        let Ok(text) = std::str::from_utf8(&data) else { continue };
        if let Ok(cfg) = parse_config_str(text, &[]) {
            let back = parse_config_str(&cfg.to_text(), &[]).unwrap();
            assert_eq!(back, cfg, "{name}");
            accepted += 1;
        }
    }
    assert!(accepted > 0);
}
