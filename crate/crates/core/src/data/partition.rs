use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::rng::SeedStream;

/// Disjoint per-client index lists covering a parent dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    clients: Vec<Vec<usize>>,
}

impl Partition {
    pub fn clients(&self) -> &[Vec<usize>] {
        &self.clients
    }

    pub fn client(&self, k: usize) -> &[usize] {
        &self.clients[k]
    }

    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn total(&self) -> usize {
        self.clients.iter().map(Vec::len).sum()
    }
}

/// Draws `p ~ Dir(alpha · 1_K)` through normalized Gamma variates.
fn dirichlet(k: usize, alpha: f64, rng: &mut impl Rng) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha validated positive");
    let mut p: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let total: f64 = p.iter().sum();
    if total > 0.0 && total.is_finite() {
        p.iter_mut().for_each(|x| *x /= total);
    } else {
        // Every variate underflowed (tiny alpha): the limit puts all mass
        // on a single client.
        p.iter_mut().for_each(|x| *x = 0.0);
        p[rng.random_range(0..k)] = 1.0;
    }
    p
}

/// Integer split of `n` proportional to `weights`, keeping the exact total.
/// Remainders go to the largest fractional parts, lower index first on ties.
pub fn largest_remainder(n: usize, weights: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &k in order.iter().cycle().take(n.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

/// Heterogeneous split: for each class independently, shuffle its indices
/// and hand them out in proportions drawn from `Dir(alpha · 1_K)`.
pub fn dirichlet_partition(
    labels: &[usize],
    clients: usize,
    alpha: f64,
    seed: SeedStream,
) -> Result<Partition> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be > 0, got {alpha}")));
    }
    if clients == 0 {
        return Err(Error::invalid("need at least one client"));
    }
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut by_class = vec![Vec::new(); classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let mut out = vec![Vec::new(); clients];
    for (c, mut indices) in by_class.into_iter().enumerate() {
        if indices.is_empty() {
            continue;
        }
        let mut rng = seed.derive("dirichlet-class", c as u64).rng();
        indices.shuffle(&mut rng);
        let p = dirichlet(clients, alpha, &mut rng);
        let counts = largest_remainder(indices.len(), &p);
        let mut start = 0;
        for (k, n) in counts.into_iter().enumerate() {
            out[k].extend_from_slice(&indices[start..start + n]);
            start += n;
        }
    }
    for list in &mut out {
        list.sort_unstable();
    }
    Ok(Partition { clients: out })
}
