//! Experiment harness for the bdes simulation core: baseline learners,
//! instance generators, JSON configs, presets and a parallel runner.

pub mod algos;
pub mod baselines;
pub mod config;
pub mod generators;
pub mod presets;
pub mod runner;
pub mod seeds;

pub use algos::{Algo, AlgoSpec};
pub use config::{ConfigError, ExperimentConfig};
pub use runner::{run_experiment, RunError, RunOptions, RunOutcome};
