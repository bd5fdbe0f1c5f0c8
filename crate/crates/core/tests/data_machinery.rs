//! Partition, long-tail profile and IDX ingestion properties.

use creff::data::idx::{encode_idx_images, encode_idx_labels, parse_idx_images, parse_idx_labels};
use creff::data::{decode_idx, dirichlet_partition, largest_remainder, load_idx, longtail_profile};
use creff::error::{Error, IdxError};
use creff::numeric::Matrix;
use creff::rng::SeedStream;
use proptest::prelude::*;

fn check_disjoint_cover(labels: &[usize], clients: usize, alpha: f64, seed: u64) {
    let p = dirichlet_partition(labels, clients, alpha, SeedStream::new(seed)).unwrap();
    assert_eq!(p.num_clients(), clients);
    let mut seen = vec![false; labels.len()];
    for list in p.clients() {
        for &i in list {
            assert!(!seen[i], "index {i} assigned twice");
            seen[i] = true;
        }
    }
    assert!(seen.iter().all(|&s| s), "some index unassigned");
}

#[test]
fn dirichlet_partition_is_disjoint_and_covering_over_100_draws() {
    let counts = longtail_profile(10, 500, 100.0).unwrap();
    let labels: Vec<usize> = counts.counts().iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect();
    for seed in 0..100 {
        let alpha = [0.05, 0.5, 1.0, 10.0][seed as usize % 4];
        check_disjoint_cover(&labels, 20, alpha, seed);
    }
}

#[test]
fn dirichlet_partition_is_reproducible_and_seed_sensitive() {
    let labels: Vec<usize> = (0..300).map(|i| i % 7).collect();
    let a = dirichlet_partition(&labels, 5, 0.5, SeedStream::new(9)).unwrap();
    assert_eq!(a, dirichlet_partition(&labels, 5, 0.5, SeedStream::new(9)).unwrap());
    assert_ne!(a, dirichlet_partition(&labels, 5, 0.5, SeedStream::new(10)).unwrap());
}

#[test]
fn small_alpha_concentrates_classes() {
    let labels: Vec<usize> = (0..2000).map(|i| i % 10).collect();
    let p = dirichlet_partition(&labels, 10, 0.01, SeedStream::new(4)).unwrap();
    // On average most of a class lands on one client; with alpha = 100
    // shares are close to uniform.
    let mean_largest_share = |p: &creff::data::Partition| {
        (0..10)
            .map(|c| {
                p.clients().iter().map(|l| l.iter().filter(|&&i| labels[i] == c).count()).max().unwrap() as f64 / 200.0
            })
            .sum::<f64>()
            / 10.0
    };
    assert!(mean_largest_share(&p) > 0.8, "{}", mean_largest_share(&p));
    let flat = dirichlet_partition(&labels, 10, 100.0, SeedStream::new(4)).unwrap();
    assert!(mean_largest_share(&flat) < 0.2, "{}", mean_largest_share(&flat));
}

#[test]
fn longtail_endpoints_are_exact() {
    for (c, n_max, imb) in [(10, 5000, 100.0), (10, 500, 100.0), (100, 500, 50.0), (2, 7, 7.0), (10, 5000, 10.0)] {
        let p = longtail_profile(c, n_max, imb).unwrap();
        assert_eq!(p.counts()[0], n_max);
        assert_eq!(p.counts()[c - 1], (n_max as f64 / imb).floor() as usize);
    }
    assert_eq!(
        longtail_profile(10, 5000, 100.0).unwrap().counts(),
        &[5000, 2997, 1796, 1077, 645, 387, 232, 139, 83, 50]
    );
    assert!(longtail_profile(10, 500, 0.5).is_err());
}

proptest! {
    #[test]
    fn longtail_profile_is_non_increasing(c in 2usize..60, n_max in 1usize..6000, imb in 1.0f64..200.0) {
        prop_assume!(n_max as f64 >= imb);
        let p = longtail_profile(c, n_max, imb).unwrap();
        prop_assert_eq!(p.counts().len(), c);
        prop_assert!(p.counts().windows(2).all(|w| w[0] >= w[1]));
        prop_assert_eq!(p.counts()[0], n_max);
        prop_assert_eq!(p.counts()[c - 1], (n_max as f64 / imb).floor() as usize);
    }

    #[test]
    fn partition_covers_any_labeling(
        labels in proptest::collection::vec(0usize..6, 1..300),
        clients in 1usize..12,
        alpha in 0.01f64..20.0,
        seed in any::<u64>(),
    ) {
        check_disjoint_cover(&labels, clients, alpha, seed);
    }

    #[test]
    fn largest_remainder_sums_exactly(n in 0usize..10_000, weights in proptest::collection::vec(0.0f64..1.0, 1..30)) {
        let total: f64 = weights.iter().sum();
        prop_assume!(total > 0.0);
        let p: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let counts = largest_remainder(n, &p);
        prop_assert_eq!(counts.iter().sum::<usize>(), n);
        for (c, q) in counts.iter().zip(&p) {
            prop_assert!((*c as f64 - q * n as f64).abs() < 1.0 + 1e-9);
        }
    }
}

fn images_file(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    for x in [0x0803u32, count, rows, cols] {
        out.extend_from_slice(&x.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

fn labels_file(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    for x in [0x0801u32, labels.len() as u32] {
        out.extend_from_slice(&x.to_be_bytes());
    }
    out.extend_from_slice(labels);
    out
}

#[test]
fn handcrafted_idx_files_decode() {
    let img = images_file(3, 1, 2, &[0, 255, 51, 102, 255, 0]);
    let lab = labels_file(&[2, 0, 1]);
    let parsed = parse_idx_images(&img).unwrap();
    assert_eq!((parsed.count, parsed.rows, parsed.cols), (3, 1, 2));
    assert_eq!(parse_idx_labels(&lab).unwrap(), vec![2, 0, 1]);
    let ds = decode_idx(&img, &lab).unwrap();
    assert_eq!(ds.labels(), &[2, 0, 1]);
    assert_eq!(ds.classes(), 3);
    assert_eq!(ds.inputs().row(0), &[0.0, 1.0]);
    assert!((ds.inputs().row(1)[0] - 0.2).abs() < 1e-15);
    assert!((ds.inputs().row(1)[1] - 0.4).abs() < 1e-15);
}

#[test]
fn idx_files_round_trip_through_disk() {
    let inputs = Matrix::from_rows(&[vec![0.0, 0.2, 0.4, 1.0], vec![1.0, 0.6, 0.8, 0.0]]).unwrap();
    let labels = vec![1, 0];
    let dir = tempfile::tempdir().unwrap();
    let (ip, lp) = (dir.path().join("img"), dir.path().join("lab"));
    std::fs::write(&ip, encode_idx_images(&inputs, 2, 2).unwrap()).unwrap();
    std::fs::write(&lp, encode_idx_labels(&labels).unwrap()).unwrap();
    let ds = load_idx(&ip, &lp).unwrap();
    assert_eq!(ds.labels(), &labels[..]);
    assert_eq!(ds.inputs(), &inputs);
}

#[test]
fn malformed_idx_is_rejected_with_named_errors() {
    let mut bad = images_file(1, 1, 1, &[7]);
    bad[..4].copy_from_slice(&0xDEAD_BEEFu32.to_be_bytes());
    assert!(matches!(parse_idx_images(&bad), Err(IdxError::BadMagic { found: 0xDEAD_BEEF, .. })));
    assert!(matches!(parse_idx_labels(&images_file(1, 1, 1, &[7])), Err(IdxError::BadMagic { .. })));

    let img = images_file(3, 1, 1, &[1, 2, 3]);
    let lab = labels_file(&[0, 1]);
    assert!(matches!(
        decode_idx(&img, &lab),
        Err(Error::Idx(IdxError::CountMismatch { images: 3, labels: 2 }))
    ));

    assert!(matches!(parse_idx_images(&images_file(2, 2, 2, &[0; 7])), Err(IdxError::Truncated { .. })));
    assert!(matches!(parse_idx_images(&[0, 0, 8]), Err(IdxError::Truncated { .. })));
    assert!(matches!(parse_idx_labels(&labels_file(&[1, 2])[..9]), Err(IdxError::Truncated { .. })));
    // A huge header must fail fast without allocating.
    assert!(parse_idx_images(&images_file(u32::MAX, u32::MAX, u32::MAX, &[])).is_err());
}
