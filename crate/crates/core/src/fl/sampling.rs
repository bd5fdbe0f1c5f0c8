use rand::seq::index;

use crate::error::{Error, Result};
use crate::rng::SeedStream;

/// Active clients `A^t` for one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundPlan {
    pub round: usize,
    /// Ascending client ids.
    pub active: Vec<usize>,
}

/// Number of clients sampled per round: `round(ratio · K)`, at least one.
pub fn sampled_count(clients: usize, ratio: f64) -> Result<usize> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::invalid(format!("client ratio must be in (0, 1], got {ratio}")));
    }
    if clients == 0 {
        return Err(Error::invalid("need at least one client"));
    }
    Ok(((ratio * clients as f64).round() as usize).clamp(1, clients))
}

/// Uniform sample without replacement, determined by `(seed, round)`.
pub fn sample_clients(clients: usize, ratio: f64, seed: SeedStream, round: usize) -> Result<RoundPlan> {
    let n = sampled_count(clients, ratio)?;
    let mut rng = seed.derive("client-sampling", round as u64).rng();
    let mut active = index::sample(&mut rng, clients, n).into_vec();
    active.sort_unstable();
    Ok(RoundPlan { round, active })
}
