//! Analytic gradients against central finite differences.

use creff::numeric::{
    classifier_grad, matching_grad_wrt_features, matching_loss, matching_loss_and_grad, softmax_ce, Activation,
    Extractor, Layer, Matrix, ModelDims, ModelParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{central_diff, random_matrix, rel_err};

const INSTANCES: u64 = 24;

#[test]
fn model_backward_matches_finite_differences() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = ModelDims {
            input_dim: rng.random_range(2..6),
            hidden: vec![rng.random_range(2..6)],
            feature_dim: rng.random_range(2..5),
            classes: rng.random_range(2..5),
        };
        let mut model = ModelParams::init(&dims, &mut rng).unwrap();
        // Non-zero biases so the check covers them too.
        model = model.map_params(|x| x + 0.05);
        let n = rng.random_range(1..6);
        let batch = random_matrix(&mut rng, n, dims.input_dim, 1.0);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..dims.classes)).collect();

        let (_, grads) = model.backward(&batch, &labels).unwrap();
        let numeric = central_diff(&model.flatten(), |w| {
            let m = model.from_flat(w).unwrap();
            softmax_ce(&m.logits(&batch).unwrap(), &labels).unwrap().0
        });
        let err = rel_err(&grads.flatten(), &numeric);
        assert!(err < 1e-5, "seed {seed}: relative error {err}");
    }
}

#[test]
fn identity_extractor_backward_matches_finite_differences() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let (i, d, c, n) = (3, 4, 3, 5);
        let layer = Layer::new(random_matrix(&mut rng, i, d, 1.0), vec![0.1; d], Activation::Identity).unwrap();
        let model = ModelParams::new(Extractor::new(vec![layer]).unwrap(), random_matrix(&mut rng, c, d, 1.0)).unwrap();
        let batch = random_matrix(&mut rng, n, i, 2.0);
        let labels: Vec<usize> = (0..n).map(|k| k % c).collect();
        let (_, grads) = model.backward(&batch, &labels).unwrap();
        let numeric = central_diff(&model.flatten(), |w| {
            let m = model.from_flat(w).unwrap();
            softmax_ce(&m.logits(&batch).unwrap(), &labels).unwrap().0
        });
        assert!(rel_err(&grads.flatten(), &numeric) < 1e-5);
    }
}

#[test]
fn classifier_grad_matches_finite_differences() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let (c, d, n) = (rng.random_range(2..7), rng.random_range(1..6), rng.random_range(1..9));
        let v = random_matrix(&mut rng, c, d, 1.0);
        let z = random_matrix(&mut rng, n, d, 2.0);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let analytic = classifier_grad(&v, &z, &labels).unwrap();
        let numeric = central_diff(v.as_slice(), |w| {
            let v = Matrix::from_vec(c, d, w.to_vec()).unwrap();
            softmax_ce(&z.matmul_t(&v).unwrap(), &labels).unwrap().0
        });
        let err = rel_err(analytic.as_slice(), &numeric);
        assert!(err < 1e-5, "seed {seed}: relative error {err}");
    }
}

#[test]
fn softmax_ce_logit_gradient_matches_finite_differences() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let (n, c) = (rng.random_range(1..6), rng.random_range(2..6));
        let logits = random_matrix(&mut rng, n, c, 4.0);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let (_, dlogits) = softmax_ce(&logits, &labels).unwrap();
        let numeric = central_diff(logits.as_slice(), |w| {
            softmax_ce(&Matrix::from_vec(n, c, w.to_vec()).unwrap(), &labels).unwrap().0
        });
        assert!(rel_err(dlogits.as_slice(), &numeric) < 1e-5);
    }
}

#[test]
fn matching_gradient_matches_finite_differences() {
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
        let (c, d, m) = (rng.random_range(2..6), rng.random_range(2..6), rng.random_range(1..6));
        let class = rng.random_range(0..c);
        let v = random_matrix(&mut rng, c, d, 1.0);
        let s = random_matrix(&mut rng, m, d, 1.5);
        let target = random_matrix(&mut rng, c, d, 1.0);
        let analytic = matching_grad_wrt_features(&v, &s, class, &target).unwrap();
        let numeric = central_diff(s.as_slice(), |w| {
            let s = Matrix::from_vec(m, d, w.to_vec()).unwrap();
            let g = classifier_grad(&v, &s, &vec![class; m]).unwrap();
            matching_loss(&g, &target).unwrap()
        });
        let err = rel_err(analytic.as_slice(), &numeric);
        assert!(err < 1e-4, "seed {seed}: relative error {err}");
    }
}

#[test]
fn matching_loss_and_grad_agree_with_separate_calls() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let v = random_matrix(&mut rng, 4, 3, 1.0);
    let s = random_matrix(&mut rng, 5, 3, 1.0);
    let target = random_matrix(&mut rng, 4, 3, 1.0);
    let (loss, grad) = matching_loss_and_grad(&v, &s, 2, &target).unwrap();
    let g = classifier_grad(&v, &s, &[2; 5]).unwrap();
    assert_eq!(loss, matching_loss(&g, &target).unwrap());
    assert_eq!(grad, matching_grad_wrt_features(&v, &s, 2, &target).unwrap());
}

#[test]
fn classifier_grad_is_count_weighted_over_concatenation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let v = random_matrix(&mut rng, 3, 4, 1.0);
    let a = random_matrix(&mut rng, 2, 4, 1.0);
    let b = random_matrix(&mut rng, 5, 4, 1.0);
    let (la, lb) = (vec![0, 2], vec![1, 1, 0, 2, 2]);
    let joined = Matrix::vstack(&[&a, &b]).unwrap();
    let labels: Vec<usize> = la.iter().chain(&lb).copied().collect();
    let whole = classifier_grad(&v, &joined, &labels).unwrap();
    let mut parts = classifier_grad(&v, &a, &la).unwrap().scale(2.0);
    parts.axpy(5.0, &classifier_grad(&v, &b, &lb).unwrap()).unwrap();
    assert!(whole.max_abs_diff(&parts.scale(1.0 / 7.0)) < 1e-12);
}
