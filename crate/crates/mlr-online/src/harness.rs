//! Experiment orchestration: JSON-backed configuration, streaming
//! estimator runs, and the end-to-end studies behind the CLI verbs.
//!
//! Every run is fully determined by the configuration and the root
//! seed; output files are byte-stable across reruns.

pub mod config;
pub mod experiments;
pub mod runners;

pub use config::{
    BoundsSettings, ExperimentConfig, InitPolicyConfig, ModelConfig, OdeSettings, PopEmSettings,
    RegressorConfig,
};
pub use experiments::{run_bounds, run_fig1, run_fig2, BoundsOutcome};
pub use runners::{run_asym, run_sym, RunSettings};
