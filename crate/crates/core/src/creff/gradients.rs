//! Per-class real feature gradients on clients and their server-side
//! aggregation.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::numeric::{classifier_grad, Extractor, Matrix, ModelParams};

/// Client-side average classifier gradient for one class. The sample count
/// stays on the client; only [`ClassGradientUpload`] leaves it.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassGradient {
    pub class_id: usize,
    pub grad: Matrix,
    pub samples: usize,
}

impl ClassGradient {
    pub fn into_upload(self) -> ClassGradientUpload {
        ClassGradientUpload {
            class_id: self.class_id,
            grad: self.grad,
        }
    }
}

/// Wire form of a class gradient: class id and the averaged `C × d` matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassGradientUpload {
    pub class_id: usize,
    pub grad: Matrix,
}

/// Everything a client sends the server in one round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClientUpload {
    /// Locally updated model `w_k^{t+1}`.
    pub model: ModelParams,
    /// `|D^k|`, the aggregation weight.
    pub num_samples: usize,
    pub class_gradients: Vec<ClassGradientUpload>,
}

/// For every class present in `local_data`, the mean gradient of the
/// cross-entropy with respect to `v_hat` over that class's real features.
pub fn client_class_gradients(
    local_data: &LabeledDataset,
    extractor: &Extractor,
    v_hat: &Matrix,
) -> Result<Vec<ClassGradient>> {
    if local_data.is_empty() {
        return Ok(Vec::new());
    }
    let features = extractor.forward(local_data.inputs())?;
    let mut out = Vec::new();
    for (c, &n) in local_data.class_counts().iter().enumerate() {
        if n == 0 {
            continue;
        }
        let rows = features.select_rows(&local_data.indices_of_class(c));
        out.push(ClassGradient {
            class_id: c,
            grad: classifier_grad(v_hat, &rows, &vec![c; n])?,
            samples: n,
        });
    }
    Ok(out)
}

/// Unweighted mean over the clients holding each class:
/// `g_c^agg = (1/|A_c|) Σ_{k ∈ A_c} g_c^k`. Classes nobody uploaded are
/// absent from the result.
pub fn aggregate_class_gradients(uploads: &[&[ClassGradientUpload]]) -> Result<BTreeMap<usize, Matrix>> {
    let mut sums: BTreeMap<usize, (Matrix, usize)> = BTreeMap::new();
    for client in uploads {
        let mut seen = std::collections::BTreeSet::new();
        for g in client.iter() {
            if !seen.insert(g.class_id) {
                return Err(Error::invalid(format!(
                    "duplicate gradient for class {} from one client",
                    g.class_id
                )));
            }
            match sums.get_mut(&g.class_id) {
                Some((sum, n)) => {
                    sum.axpy(1.0, &g.grad)?;
                    *n += 1;
                }
                None => {
                    sums.insert(g.class_id, (g.grad.clone(), 1));
                }
            }
        }
    }
    Ok(sums
        .into_iter()
        .map(|(c, (sum, n))| {
            let mean = if n == 1 { sum } else { sum.scale(1.0 / n as f64) };
            (c, mean)
        })
        .collect())
}

/// Gradient of the mean cross-entropy w.r.t. `v_hat` over federated
/// features that all carry label `class`.
pub fn federated_feature_gradient(v_hat: &Matrix, features: &Matrix, class: usize) -> Result<Matrix> {
    if features.rows() == 0 {
        return Err(Error::invalid("no federated features for this class"));
    }
    classifier_grad(v_hat, features, &vec![class; features.rows()])
}
