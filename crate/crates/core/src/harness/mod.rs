//! Configuration, experiment orchestration and persistence.

pub mod checkpoint;
mod commands;
pub mod config;
mod experiment;
pub mod output;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use commands::{
    compare, dedup_m_values, eval_checkpoint, gen_data, sweep_m, CheckpointEval, CompareOutcome,
    GeneratedPaths, SweepOutcome,
};
pub use config::{parse_config, parse_config_str, parse_override, DataSource, ExperimentConfig, Method, Preset};
pub use experiment::{
    build_data, checkpoint_path, run_experiment, run_prepared, Experiment, ExperimentData,
    RunOptions, RunOutcome, RunState, StageError,
};
pub use output::{Summary, ROUNDS_HEADER};

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "CREFF_OUTPUT_DIR";
