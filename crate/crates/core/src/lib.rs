//! Deterministic federated-learning simulator for classifier re-training
//! on federated features, with FedAvg, FedProx and τ-norm baselines.
//!
//! Every random draw derives from one master seed through [`rng::SeedStream`],
//! and client work runs in parallel with results reduced in client order,
//! so outputs do not depend on the worker count.

pub mod creff;
pub mod data;
pub mod error;
pub mod fl;
pub mod harness;
pub mod metrics;
pub mod numeric;
pub mod rng;

pub use error::{Error, Result};
