//! Experiment harness for the `oga-core` planner: config files, a parallel
//! seeded grid runner with CSV output, agent scores, query-ratio and return
//! statistics, and a decision-time benchmark.

pub mod bench;
pub mod config;
pub mod csvio;
pub mod figure1;
pub mod runner;
pub mod scores;
pub mod stats;

pub use config::{AgentSpec, Cell, ExperimentConfig, VariantKind};
pub use runner::{run_episode, run_experiment, ExperimentOutput, RunRecord};
