//! Experiment harness: presets, run configuration, checkpoints and the
//! drivers that turn a preset into CSV output.

pub mod checkpoint;
pub mod config;
pub mod output;
pub mod preset;
pub mod runs;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::RunConfig;
pub use preset::{ExperimentPreset, PresetName};
pub use runs::{
    inspect_checkpoint, run_evaluation, run_thermalize, run_training, EvaluationSummary, ThermalizeSummary,
    TrainingSummary,
};
