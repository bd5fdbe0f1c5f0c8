//! Long-tail class profiles, synthetic data, heterogeneous client
//! partitions and IDX ingestion.

mod dataset;
pub mod idx;
mod partition;
mod profile;
mod synth;

pub use dataset::LabeledDataset;
pub use idx::{decode_idx, load_idx};
pub use partition::{dirichlet_partition, largest_remainder, Partition};
pub use profile::{longtail_profile, ClassProfile};
pub use synth::{apply_profile, synth_mixture, GaussianMixture};
