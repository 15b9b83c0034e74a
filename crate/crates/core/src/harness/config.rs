//! Run configuration: a TOML file plus command-line overrides.
//!
//! ```toml
//! preset = "single_quadratic"
//! seed = 7
//!
//! [physics]
//! nbar = 100.0
//!
//! [train]
//! epochs = 120
//!
//! [evaluate]
//! n_traj = 500
//! steps = 20000
//! ```
//!
//! Every field is optional. Values present on the command line win over the
//! file, and the file wins over the preset.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::actuation::CavityResponse;
use crate::dynamics::ModeParams;
use crate::error::{Error, Result};
use crate::reinforce::ActionMode;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub physics: PhysicsOverrides,
    #[serde(default)]
    pub train: TrainOverrides,
    #[serde(default)]
    pub evaluate: EvaluateOverrides,
    #[serde(default)]
    pub thermalize: ThermalizeOverrides,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsOverrides {
    pub dt: Option<f64>,
    /// Replaces every mode.
    pub modes: Option<Vec<ModeParams>>,
    /// Sets the thermal occupancy of every mode.
    pub nbar: Option<f64>,
    pub kappa: Option<f64>,
    /// Top-level intensity (cavity regimes) or force amplitude (direct).
    pub full_scale: Option<f64>,
    pub cavity_response: Option<CavityResponse>,
    pub n_actions: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub epochs: Option<u64>,
    pub batch: Option<usize>,
    pub steps: Option<usize>,
    pub eta: Option<f64>,
    pub reward_scale: Option<f64>,
    pub layer_sizes: Option<Vec<usize>>,
    pub checkpoint_every: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateOverrides {
    pub n_traj: Option<usize>,
    pub steps: Option<usize>,
    pub mode: Option<ActionMode>,
    pub record_actions: Option<usize>,
    pub series_stride: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalizeOverrides {
    pub n_traj: Option<usize>,
    pub steps: Option<usize>,
    pub series_stride: Option<usize>,
}

fn pick<T: Clone>(high: &Option<T>, low: &Option<T>) -> Option<T> {
    high.clone().or_else(|| low.clone())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Field-wise merge where values in `over` take precedence.
    pub fn merged_with(&self, over: &RunConfig) -> RunConfig {
        RunConfig {
            preset: pick(&over.preset, &self.preset),
            seed: pick(&over.seed, &self.seed),
            out: pick(&over.out, &self.out),
            physics: PhysicsOverrides {
                dt: pick(&over.physics.dt, &self.physics.dt),
                modes: pick(&over.physics.modes, &self.physics.modes),
                nbar: pick(&over.physics.nbar, &self.physics.nbar),
                kappa: pick(&over.physics.kappa, &self.physics.kappa),
                full_scale: pick(&over.physics.full_scale, &self.physics.full_scale),
                cavity_response: pick(&over.physics.cavity_response, &self.physics.cavity_response),
                n_actions: pick(&over.physics.n_actions, &self.physics.n_actions),
            },
            train: TrainOverrides {
                epochs: pick(&over.train.epochs, &self.train.epochs),
                batch: pick(&over.train.batch, &self.train.batch),
                steps: pick(&over.train.steps, &self.train.steps),
                eta: pick(&over.train.eta, &self.train.eta),
                reward_scale: pick(&over.train.reward_scale, &self.train.reward_scale),
                layer_sizes: pick(&over.train.layer_sizes, &self.train.layer_sizes),
                checkpoint_every: pick(&over.train.checkpoint_every, &self.train.checkpoint_every),
            },
            evaluate: EvaluateOverrides {
                n_traj: pick(&over.evaluate.n_traj, &self.evaluate.n_traj),
                steps: pick(&over.evaluate.steps, &self.evaluate.steps),
                mode: pick(&over.evaluate.mode, &self.evaluate.mode),
                record_actions: pick(&over.evaluate.record_actions, &self.evaluate.record_actions),
                series_stride: pick(&over.evaluate.series_stride, &self.evaluate.series_stride),
            },
            thermalize: ThermalizeOverrides {
                n_traj: pick(&over.thermalize.n_traj, &self.thermalize.n_traj),
                steps: pick(&over.thermalize.steps, &self.thermalize.steps),
                series_stride: pick(&over.thermalize.series_stride, &self.thermalize.series_stride),
            },
        }
    }
}
