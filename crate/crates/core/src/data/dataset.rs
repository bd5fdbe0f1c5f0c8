use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// Input rows with integer class labels in `[0, classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    inputs: Matrix,
    labels: Vec<usize>,
    class_counts: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(inputs: Matrix, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if inputs.rows() != labels.len() {
            return Err(Error::invalid(format!(
                "{} input rows but {} labels",
                inputs.rows(),
                labels.len()
            )));
        }
        let mut class_counts = vec![0; classes];
        for &y in &labels {
            match class_counts.get_mut(y) {
                Some(n) => *n += 1,
                None => {
                    return Err(Error::invalid(format!(
                        "label {y} out of range for {classes} classes"
                    )))
                }
            }
        }
        Ok(LabeledDataset {
            inputs,
            labels,
            class_counts,
        })
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Per-class sample counts `n_c`.
    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn classes(&self) -> usize {
        self.class_counts.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        let labels: Vec<usize> = indices.iter().map(|&i| self.labels[i]).collect();
        let mut class_counts = vec![0; self.classes()];
        for &y in &labels {
            class_counts[y] += 1;
        }
        LabeledDataset {
            inputs: self.inputs.select_rows(indices),
            labels,
            class_counts,
        }
    }

    /// Indices of every sample of class `c`, ascending.
    pub fn indices_of_class(&self, c: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &y)| (y == c).then_some(i))
            .collect()
    }

    /// Same data, declared over `classes` classes (must not drop any label).
    pub fn with_classes(self, classes: usize) -> Result<Self> {
        LabeledDataset::new(self.inputs, self.labels, classes)
    }
}
