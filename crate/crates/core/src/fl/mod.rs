//! Simulated federated execution: clients, sampling, FedAvg and its
//! FedProx / τ-norm variants.

mod aggregate;
mod client;
mod fedavg;
mod sampling;

pub use aggregate::{fedavg_aggregate, tau_norm_classifier};
pub use client::{
    fedprox_local_update, local_update, train_locally, ClientState, Federation, LocalRule,
    LocalTraining,
};
pub use fedavg::{
    aggregate_or_keep, collect_local_models, fedavg_round, run_fedavg, EvalContext, FedAvgConfig,
    FedAvgRun,
};
pub use sampling::{sample_clients, sampled_count, RoundPlan};
