use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use super::dataset::LabeledDataset;
use super::profile::ClassProfile;
use crate::error::{Error, Result};
use crate::numeric::{dot, norm, Matrix};
use crate::rng::SeedStream;

/// Isotropic Gaussian mixture with one component per class.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    means: Matrix,
    noise_sigma: f64,
}

impl GaussianMixture {
    /// Class means at pairwise distance at least `separation`. When
    /// `classes <= input_dim` the means are scaled orthonormal vectors, so
    /// every pair is exactly `separation` apart.
    pub fn new(
        classes: usize,
        input_dim: usize,
        separation: f64,
        noise_sigma: f64,
        seed: SeedStream,
    ) -> Result<Self> {
        if input_dim < 1 {
            return Err(Error::invalid("input_dim must be at least 1"));
        }
        if classes < 1 {
            return Err(Error::invalid("need at least one class"));
        }
        if !(separation > 0.0 && separation.is_finite()) {
            return Err(Error::invalid("separation must be > 0"));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(Error::invalid("noise_sigma must be >= 0"));
        }
        let mut rng = seed.derive("mixture-means", 0).rng();
        let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(classes);
        while dirs.len() < classes {
            let mut v: Vec<f64> = (0..input_dim).map(|_| rng.sample(StandardNormal)).collect();
            if classes <= input_dim {
                for u in &dirs {
                    let proj = dot(&v, u);
                    v.iter_mut().zip(u).for_each(|(x, y)| *x -= proj * y);
                }
            }
            let n = norm(&v);
            if n > 1e-8 {
                v.iter_mut().for_each(|x| *x /= n);
                dirs.push(v);
            }
        }
        let scale = if classes <= input_dim {
            separation / std::f64::consts::SQRT_2
        } else {
            let mut min_dist = f64::INFINITY;
            for i in 0..classes {
                for j in i + 1..classes {
                    let d: f64 = dirs[i]
                        .iter()
                        .zip(&dirs[j])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    min_dist = min_dist.min(d);
                }
            }
            if min_dist > 0.0 && min_dist.is_finite() {
                separation / min_dist
            } else {
                separation
            }
        };
        let means = Matrix::from_fn(classes, input_dim, |c, j| scale * dirs[c][j]);
        Ok(GaussianMixture { means, noise_sigma })
    }

    pub fn means(&self) -> &Matrix {
        &self.means
    }

    pub fn classes(&self) -> usize {
        self.means.rows()
    }

    /// `counts[c]` samples of class `c`, grouped by class.
    pub fn sample(&self, counts: &[usize], seed: SeedStream) -> Result<LabeledDataset> {
        if counts.len() != self.classes() {
            return Err(Error::invalid(format!(
                "{} counts for a {}-class mixture",
                counts.len(),
                self.classes()
            )));
        }
        let total: usize = counts.iter().sum();
        let dim = self.means.cols();
        let mut data = Vec::with_capacity(total * dim);
        let mut labels = Vec::with_capacity(total);
        for (c, &n) in counts.iter().enumerate() {
            let mut rng = seed.derive("mixture-class", c as u64).rng();
            for _ in 0..n {
                for &mu in self.means.row(c) {
                    let eps: f64 = rng.sample(StandardNormal);
                    data.push(mu + self.noise_sigma * eps);
                }
                labels.push(c);
            }
        }
        LabeledDataset::new(Matrix::from_vec(total, dim, data)?, labels, self.classes())
    }
}

/// One-shot synthetic dataset whose class counts follow `profile`.
pub fn synth_mixture(
    classes: usize,
    input_dim: usize,
    profile: &ClassProfile,
    separation: f64,
    noise_sigma: f64,
    seed: SeedStream,
) -> Result<LabeledDataset> {
    if profile.classes() != classes {
        return Err(Error::invalid("profile length differs from class count"));
    }
    GaussianMixture::new(classes, input_dim, separation, noise_sigma, seed)?
        .sample(profile.counts(), seed.derive("mixture-samples", 0))
}

/// Uniform per-class subsample without replacement down to `profile`.
pub fn apply_profile(
    dataset: &LabeledDataset,
    profile: &ClassProfile,
    seed: SeedStream,
) -> Result<LabeledDataset> {
    if profile.classes() != dataset.classes() {
        return Err(Error::invalid(format!(
            "profile has {} classes, dataset has {}",
            profile.classes(),
            dataset.classes()
        )));
    }
    let mut chosen = Vec::with_capacity(profile.total());
    for (c, &want) in profile.counts().iter().enumerate() {
        let pool = dataset.indices_of_class(c);
        if pool.len() < want {
            return Err(Error::invalid(format!(
                "class {c} has {} samples, profile needs {want}",
                pool.len()
            )));
        }
        let mut rng = seed.derive("apply-profile", c as u64).rng();
        chosen.extend(index::sample(&mut rng, pool.len(), want).into_iter().map(|i| pool[i]));
    }
    Ok(dataset.subset(&chosen))
}
