use crate::error::{Error, Result};
use crate::numeric::{Matrix, ModelParams};

/// Size-weighted average `Σ_k (|D^k| / Σ_j |D^j|) w_k`.
pub fn fedavg_aggregate(models: &[(&ModelParams, usize)]) -> Result<ModelParams> {
    let (first, _) = models
        .first()
        .ok_or_else(|| Error::invalid("no models to aggregate"))?;
    let total: usize = models.iter().map(|(_, n)| n).sum();
    if total == 0 {
        return Err(Error::invalid("aggregated clients hold no samples"));
    }
    let total = total as f64;
    let mut out = first.map_params(|x| x * (models[0].1 as f64 / total));
    for (w, n) in &models[1..] {
        let weight = *n as f64 / total;
        out.zip_for_each(w, |acc, x| *acc += weight * x)?;
    }
    Ok(out)
}

/// Rescales each classifier row to `v_c / ‖v_c‖^τ`.
pub fn tau_norm_classifier(classifier: &Matrix, tau: f64) -> Result<Matrix> {
    if !tau.is_finite() {
        return Err(Error::invalid("tau must be finite"));
    }
    let mut out = classifier.clone();
    if tau == 0.0 {
        return Ok(out);
    }
    for c in 0..out.rows() {
        let row = out.row_mut(c);
        let n = crate::numeric::norm(row);
        if n == 0.0 && tau > 0.0 {
            return Err(Error::invalid(format!("classifier row {c} is zero")));
        }
        let scale = n.powf(tau).recip();
        row.iter_mut().for_each(|x| *x *= scale);
    }
    Ok(out)
}
