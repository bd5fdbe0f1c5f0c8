use rand::seq::SliceRandom;

use crate::data::{LabeledDataset, Partition};
use crate::error::{Error, Result};
use crate::numeric::ModelParams;
use crate::rng::SeedStream;

/// One simulated client: its private data and its own seed stream.
#[derive(Debug, Clone)]
pub struct ClientState {
    id: usize,
    data: LabeledDataset,
    stream: SeedStream,
}

impl ClientState {
    pub fn new(id: usize, data: LabeledDataset, stream: SeedStream) -> Self {
        ClientState { id, data, stream }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn data(&self) -> &LabeledDataset {
        &self.data
    }

    /// `|D^k|`.
    pub fn num_samples(&self) -> usize {
        self.data.len()
    }

    pub fn stream(&self) -> SeedStream {
        self.stream
    }
}

/// Registry of all clients in a simulation.
#[derive(Debug, Clone)]
pub struct Federation {
    clients: Vec<ClientState>,
    stream: SeedStream,
}

impl Federation {
    pub fn new(clients: Vec<ClientState>, stream: SeedStream) -> Result<Self> {
        if clients.is_empty() {
            return Err(Error::invalid("a federation needs at least one client"));
        }
        Ok(Federation { clients, stream })
    }

    /// One client per partition slot, each holding its slice of `dataset`.
    pub fn from_partition(dataset: &LabeledDataset, partition: &Partition, stream: SeedStream) -> Result<Self> {
        let clients = partition
            .clients()
            .iter()
            .enumerate()
            .map(|(k, idx)| ClientState::new(k, dataset.subset(idx), stream.derive("client", k as u64)))
            .collect();
        Federation::new(clients, stream)
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    pub fn client(&self, k: usize) -> &ClientState {
        &self.clients[k]
    }

    pub fn len(&self) -> usize {
        self.clients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clients.is_empty()
    }

    pub fn stream(&self) -> SeedStream {
        self.stream
    }
}

/// Mini-batch SGD settings for client-side training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTraining {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
}

/// Local objective: plain cross-entropy, or cross-entropy plus the proximal
/// term `(μ/2)‖w − w_global‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalRule {
    Sgd,
    Prox { mu: f64 },
}

impl LocalTraining {
    fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("local learning rate must be >= 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        Ok(())
    }
}

/// Runs `epochs` shuffled passes of mini-batch SGD starting from `global`.
/// Returns `None` (skip) when the client holds no data.
pub fn local_update(
    client: &ClientState,
    global: &ModelParams,
    round: usize,
    cfg: &LocalTraining,
) -> Result<Option<ModelParams>> {
    train_locally(client, global, round, cfg, LocalRule::Sgd)
}

/// Local training with the proximal term; its gradient `μ(w − w_global)` is
/// added to every cross-entropy gradient.
pub fn fedprox_local_update(
    client: &ClientState,
    global: &ModelParams,
    round: usize,
    cfg: &LocalTraining,
    mu: f64,
) -> Result<Option<ModelParams>> {
    train_locally(client, global, round, cfg, LocalRule::Prox { mu })
}

pub fn train_locally(
    client: &ClientState,
    global: &ModelParams,
    round: usize,
    cfg: &LocalTraining,
    rule: LocalRule,
) -> Result<Option<ModelParams>> {
    cfg.validate()?;
    let mu = match rule {
        LocalRule::Sgd => 0.0,
        LocalRule::Prox { mu } if mu >= 0.0 && mu.is_finite() => mu,
        LocalRule::Prox { mu } => return Err(Error::invalid(format!("mu must be >= 0, got {mu}"))),
    };
    let data = client.data();
    if data.is_empty() {
        return Ok(None);
    }
    let mut rng = client.stream().derive("local-batches", round as u64).rng();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut w = global.clone();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = data.inputs().select_rows(chunk);
            let labels: Vec<usize> = chunk.iter().map(|&i| data.labels()[i]).collect();
            let (_, mut grads) = w.backward(&batch, &labels)?;
            if mu > 0.0 {
                grads.add_scaled_difference(mu, &w, global)?;
            }
            w = w.sgd_step(&grads, cfg.lr)?;
        }
    }
    Ok(Some(w))
}
