//! Row-wise cosine gradient-matching loss and its derivative with respect to
//! the features that produced one of the two gradients.
//!
//! For one class `c` with features `S` (m×d) and classifier `v` (C×d):
//!
//! ```text
//! P = softmax(S vᵀ)          R = P − 1·e_cᵀ
//! G = (1/m) Rᵀ S             D = (1/C) Σ_j (1 − cos(G_j, A_j))
//! ```
//!
//! `S` enters `G` twice, directly and through the softmax residual `R`, so
//! `∂D/∂s_i = (1/m)[Γᵀ r_i + vᵀ (p_i ⊙ (q_i − p_i·q_i))]` with `Γ = ∂D/∂G`
//! and `q_i = Γ s_i`.

use super::loss::classifier_grad;
use super::matrix::{dot, norm, Matrix};
use crate::error::{Error, Result};

/// Mean over rows of `1 − cos(a_j, b_j)`.
///
/// A row pair that is zero on both sides contributes 0; a pair with exactly
/// one zero side contributes 1.
pub fn matching_loss(g_fed: &Matrix, g_agg: &Matrix) -> Result<f64> {
    check_pair(g_fed, g_agg)?;
    let total: f64 = g_fed
        .row_iter()
        .zip(g_agg.row_iter())
        .map(|(a, b)| row_dissimilarity(a, b))
        .sum();
    Ok(total / g_fed.rows() as f64)
}

fn check_pair(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::invalid(format!(
            "matching loss on shapes {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if a.rows() == 0 {
        return Err(Error::invalid("matching loss needs at least one row"));
    }
    Ok(())
}

pub(crate) fn row_dissimilarity(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    match (na > 0.0, nb > 0.0) {
        (false, false) => 0.0,
        (true, true) => 1.0 - (dot(a, b) / (na * nb)).clamp(-1.0, 1.0),
        _ => 1.0,
    }
}

/// `∂D/∂G` for [`matching_loss`], with `g_agg` held constant. Rows with a
/// zero side get a zero gradient.
pub fn matching_loss_grad(g_fed: &Matrix, g_agg: &Matrix) -> Result<Matrix> {
    check_pair(g_fed, g_agg)?;
    let inv_rows = 1.0 / g_fed.rows() as f64;
    let mut out = Matrix::zeros(g_fed.rows(), g_fed.cols());
    for i in 0..g_fed.rows() {
        let (x, a) = (g_fed.row(i), g_agg.row(i));
        let (nx, na) = (norm(x), norm(a));
        if nx == 0.0 || na == 0.0 {
            continue;
        }
        let cos = dot(x, a) / (nx * na);
        for ((o, &xj), &aj) in out.row_mut(i).iter_mut().zip(x).zip(a) {
            *o = -inv_rows * (aj / (na * nx) - cos * xj / (nx * nx));
        }
    }
    Ok(out)
}

/// Matching loss between the gradient produced by `features` (all labelled
/// `class`) and the fixed target `g_target`, together with its exact
/// gradient with respect to every feature entry.
pub fn matching_loss_and_grad(
    classifier: &Matrix,
    features: &Matrix,
    class: usize,
    g_target: &Matrix,
) -> Result<(f64, Matrix)> {
    let m = features.rows();
    if m == 0 {
        return Err(Error::invalid("matching gradient needs at least one feature"));
    }
    if class >= classifier.rows() {
        return Err(Error::invalid(format!(
            "class {class} out of range for {} classes",
            classifier.rows()
        )));
    }
    let labels = vec![class; m];
    let g_fed = classifier_grad(classifier, features, &labels)?;
    let loss = matching_loss(&g_fed, g_target)?;
    let gamma = matching_loss_grad(&g_fed, g_target)?;

    let logits = features.matmul_t(classifier)?;
    let inv_m = 1.0 / m as f64;
    let mut out = Matrix::zeros(m, features.cols());
    let mut p = vec![0.0; classifier.rows()];
    let mut q = vec![0.0; classifier.rows()];
    let mut dl = vec![0.0; classifier.rows()];
    for i in 0..m {
        p.copy_from_slice(logits.row(i));
        super::loss::softmax_in_place(&mut p);
        let s = features.row(i);
        for (j, qj) in q.iter_mut().enumerate() {
            *qj = dot(gamma.row(j), s);
        }
        let pq = dot(&p, &q);
        for j in 0..p.len() {
            dl[j] = p[j] * (q[j] - pq);
        }
        let row = out.row_mut(i);
        for j in 0..p.len() {
            // Residual r_ij = p_ij − [j == class].
            let r = p[j] - if j == class { 1.0 } else { 0.0 };
            let coef_direct = r * inv_m;
            let coef_softmax = dl[j] * inv_m;
            for ((o, &gj), &vj) in row.iter_mut().zip(gamma.row(j)).zip(classifier.row(j)) {
                *o += coef_direct * gj + coef_softmax * vj;
            }
        }
    }
    Ok((loss, out))
}

/// Gradient of the matching loss with respect to the features.
pub fn matching_grad_wrt_features(
    classifier: &Matrix,
    features: &Matrix,
    class: usize,
    g_target: &Matrix,
) -> Result<Matrix> {
    matching_loss_and_grad(classifier, features, class, g_target).map(|(_, g)| g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(r: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&r.iter().map(|x| x.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn loss_fixtures() {
        let a = rows(&[&[1.0, 2.0], &[-3.0, 0.5]]);
        assert!(matching_loss(&a, &a).unwrap().abs() <= 1e-12);
        assert!((matching_loss(&a, &a.scale(-1.0)).unwrap() - 2.0).abs() <= 1e-12);
        let b = rows(&[&[-2.0, 1.0], &[0.5, 3.0]]);
        assert!((matching_loss(&a, &b).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn zero_row_convention() {
        let a = rows(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let b = rows(&[&[0.0, 0.0], &[0.0, 0.0]]);
        // Row 0 both zero → 0; row 1 one-sided zero → 1.
        assert_eq!(matching_loss(&a, &b).unwrap(), 0.5);
        assert_eq!(matching_loss_grad(&a, &b).unwrap().frobenius_norm(), 0.0);
    }

    #[test]
    fn shape_and_empty_errors() {
        assert!(matching_loss(&Matrix::zeros(2, 2), &Matrix::zeros(2, 3)).is_err());
        let v = Matrix::zeros(2, 2);
        assert!(matching_grad_wrt_features(&v, &Matrix::zeros(0, 2), 0, &v).is_err());
    }

    #[test]
    fn aligned_target_is_stationary() {
        let v = rows(&[&[0.3, -0.2, 0.1], &[-0.4, 0.5, 0.2], &[0.1, 0.1, -0.6]]);
        let s = rows(&[&[0.7, -1.2, 0.4], &[0.2, 0.9, -0.3]]);
        let target = classifier_grad(&v, &s, &[1, 1]).unwrap();
        let (loss, grad) = matching_loss_and_grad(&v, &s, 1, &target).unwrap();
        assert!(loss.abs() < 1e-12);
        assert!(grad.frobenius_norm() < 1e-8);
    }

    #[test]
    fn target_scale_invariance() {
        let v = rows(&[&[0.3, -0.2], &[-0.4, 0.5]]);
        let s = rows(&[&[0.7, -1.2]]);
        let target = rows(&[&[0.2, 0.1], &[-0.3, 0.4]]);
        let g1 = matching_grad_wrt_features(&v, &s, 0, &target).unwrap();
        let g2 = matching_grad_wrt_features(&v, &s, 0, &target.scale(10.0)).unwrap();
        assert!(g1.max_abs_diff(&g2) < 1e-10);
    }
}
