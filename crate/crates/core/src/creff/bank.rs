use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numeric::Matrix;
use crate::rng::SeedStream;

/// The server's learnable balanced feature set: exactly `m` rows of
/// dimension `d` per class, where every row of block `c` carries label `c`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FederatedFeatureBank {
    blocks: Vec<Matrix>,
    per_class: usize,
    dim: usize,
}

impl FederatedFeatureBank {
    /// Every entry drawn i.i.d. from a standard normal.
    pub fn gaussian(classes: usize, per_class: usize, dim: usize, seed: SeedStream) -> Result<Self> {
        if classes == 0 || dim == 0 {
            return Err(Error::invalid("bank needs at least one class and dimension"));
        }
        let mut rng = seed.rng();
        let blocks = (0..classes)
            .map(|_| Matrix::from_fn(per_class, dim, |_, _| rng.sample(StandardNormal)))
            .collect();
        Ok(FederatedFeatureBank {
            blocks,
            per_class,
            dim,
        })
    }

    pub fn from_blocks(blocks: Vec<Matrix>) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::invalid("bank needs at least one class"))?;
        let (per_class, dim) = first.shape();
        if blocks.iter().any(|b| b.shape() != (per_class, dim)) {
            return Err(Error::invalid("every class block must be m x d"));
        }
        if dim == 0 {
            return Err(Error::invalid("bank feature dimension must be positive"));
        }
        if blocks.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("bank contains non-finite features"));
        }
        Ok(FederatedFeatureBank {
            blocks,
            per_class,
            dim,
        })
    }

    pub fn classes(&self) -> usize {
        self.blocks.len()
    }

    /// `m`, the number of federated features per class.
    pub fn per_class(&self) -> usize {
        self.per_class
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.per_class == 0
    }

    pub fn class_features(&self, c: usize) -> &Matrix {
        &self.blocks[c]
    }

    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }

    pub(crate) fn blocks_mut(&mut self) -> &mut [Matrix] {
        &mut self.blocks
    }

    /// All `C · m` features stacked class by class, with their labels.
    pub fn stacked(&self) -> (Matrix, Vec<usize>) {
        let refs: Vec<&Matrix> = self.blocks.iter().collect();
        let features = Matrix::vstack(&refs).expect("blocks share a width");
        let labels = (0..self.classes())
            .flat_map(|c| std::iter::repeat_n(c, self.per_class))
            .collect();
        (features, labels)
    }
}
