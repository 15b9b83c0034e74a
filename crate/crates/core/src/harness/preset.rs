//! Named experiment presets and their override rules.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::actuation::{ActionSet, Actuator, CavityResponse, Regime};
use crate::dynamics::{ModeParams, ModeSet};
use crate::error::{Error, Result};
use crate::policy::PolicyParams;
use crate::reinforce::{ActionMode, Environment, TrainingConfig};

use super::config::RunConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    /// Thermalization of a cold single mode.
    Thermalize,
    /// Parametric cooling of one mode through quadratic cavity coupling.
    SingleQuadratic,
    /// One shared force cooling four modes.
    FourLinear,
}

impl PresetName {
    pub const ALL: [PresetName; 3] = [PresetName::Thermalize, PresetName::SingleQuadratic, PresetName::FourLinear];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Thermalize => "thermalize",
            PresetName::SingleQuadratic => "single_quadratic",
            PresetName::FourLinear => "four_linear",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset `{s}` (expected thermalize|single_quadratic|four_linear)")))
    }
}

/// Actuator description in physical terms.
///
/// `full_scale` is the steady-state intensity `|α|²` at the top drive level
/// for the cavity regimes, and the top force amplitude `u_max` for
/// [`Regime::DirectForce`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActuationParams {
    pub regime: Regime,
    pub n_actions: usize,
    pub kappa: f64,
    pub full_scale: f64,
    pub response: CavityResponse,
}

impl ActuationParams {
    /// Top drive level: `κ sqrt(full_scale)` for a cavity, `full_scale`
    /// otherwise.
    pub fn max_drive(&self) -> f64 {
        if self.regime.uses_cavity() {
            self.kappa * self.full_scale.sqrt()
        } else {
            self.full_scale
        }
    }

    pub fn build(&self) -> Result<Actuator> {
        if !(self.full_scale > 0.0 && self.full_scale.is_finite()) {
            return Err(Error::invalid(format!("full-scale drive must be > 0, got {}", self.full_scale)));
        }
        let actions = ActionSet::uniform(self.n_actions, self.max_drive(), self.regime)?;
        Actuator::new(actions, self.kappa, self.response)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingParams {
    pub batch_size: usize,
    pub epochs: u64,
    pub steps: usize,
    pub eta: f64,
    pub reward_scale: f64,
    pub layer_sizes: Vec<usize>,
    pub checkpoint_every: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationParams {
    pub n_traj: usize,
    pub steps: usize,
    pub mode: ActionMode,
    /// Number of leading trajectories whose action sequence is written.
    pub record_actions: usize,
    /// Write the mean-energy series every `series_stride` steps.
    pub series_stride: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalizeParams {
    pub n_traj: usize,
    pub steps: usize,
    pub series_stride: usize,
}

/// Complete parameter bundle of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPreset {
    pub name: PresetName,
    pub seed: u64,
    pub dt: f64,
    pub modes: ModeSet,
    pub actuation: ActuationParams,
    pub training: TrainingParams,
    pub evaluation: EvaluationParams,
    pub thermalize: ThermalizeParams,
}

const DT: f64 = 0.05;
const GAMMA: f64 = 4e-5;
const NBAR: f64 = 100.0;
const DEFAULT_SEED: u64 = 20_200_612;

impl ExperimentPreset {
    pub fn new(name: PresetName) -> Self {
        match name {
            PresetName::Thermalize => thermalize(),
            PresetName::SingleQuadratic => single_quadratic(),
            PresetName::FourLinear => four_linear(),
        }
    }

    pub fn environment(&self) -> Result<Environment> {
        Environment::new(self.modes.clone(), self.actuation.build()?, self.dt)
    }

    pub fn training_config(&self) -> Result<TrainingConfig> {
        let config = TrainingConfig {
            batch_size: self.training.batch_size,
            epochs: self.training.epochs,
            steps: self.training.steps,
            eta: self.training.eta,
            reward_scale: self.training.reward_scale,
            layer_sizes: self.training.layer_sizes.clone(),
            env: self.environment()?,
        };
        config.validate()?;
        Ok(config)
    }

    /// Apply every override present in `config`.
    pub fn apply(&mut self, config: &RunConfig) -> Result<()> {
        if let Some(seed) = config.seed {
            self.seed = seed;
        }
        let phys = &config.physics;
        if let Some(dt) = phys.dt {
            self.dt = dt;
        }
        if let Some(modes) = &phys.modes {
            self.modes = ModeSet::new(modes.clone())?;
        }
        if let Some(nbar) = phys.nbar {
            self.modes = self.modes.clone().with_nbar(nbar)?;
        }
        if let Some(kappa) = phys.kappa {
            self.actuation.kappa = kappa;
        }
        if let Some(full_scale) = phys.full_scale {
            self.actuation.full_scale = full_scale;
        }
        if let Some(response) = phys.cavity_response {
            self.actuation.response = response;
        }
        if let Some(n) = phys.n_actions {
            self.actuation.n_actions = n;
        }

        let t = &config.train;
        let tp = &mut self.training;
        if let Some(v) = t.epochs {
            tp.epochs = v;
        }
        if let Some(v) = t.batch {
            tp.batch_size = v;
        }
        if let Some(v) = t.steps {
            tp.steps = v;
        }
        if let Some(v) = t.eta {
            tp.eta = v;
        }
        if let Some(v) = t.reward_scale {
            tp.reward_scale = v;
        }
        if let Some(v) = &t.layer_sizes {
            tp.layer_sizes = v.clone();
        }
        if let Some(v) = t.checkpoint_every {
            tp.checkpoint_every = v;
        }

        let e = &config.evaluate;
        let ep = &mut self.evaluation;
        if let Some(v) = e.n_traj {
            ep.n_traj = v;
        }
        if let Some(v) = e.steps {
            ep.steps = v;
        }
        if let Some(v) = e.mode {
            ep.mode = v;
        }
        if let Some(v) = e.record_actions {
            ep.record_actions = v;
        }
        if let Some(v) = e.series_stride {
            ep.series_stride = v;
        }

        let th = &config.thermalize;
        let tp = &mut self.thermalize;
        if let Some(v) = th.n_traj {
            tp.n_traj = v;
        }
        if let Some(v) = th.steps {
            tp.steps = v;
        }
        if let Some(v) = th.series_stride {
            tp.series_stride = v;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be > 0, got {}", self.dt)));
        }
        self.actuation.build()?;
        if self.training.checkpoint_every == 0 {
            return Err(Error::invalid("checkpoint interval must be >= 1"));
        }
        if self.evaluation.series_stride == 0 || self.thermalize.series_stride == 0 {
            return Err(Error::invalid("series stride must be >= 1"));
        }
        Ok(())
    }
}

fn single_mode(g: f64) -> ModeSet {
    ModeSet::single(ModeParams {
        omega: 1.0,
        gamma: GAMMA,
        nbar: NBAR,
        g,
    })
    .expect("valid preset mode")
}

fn evaluation_defaults() -> EvaluationParams {
    EvaluationParams {
        n_traj: 4000,
        steps: 20_000,
        mode: ActionMode::Argmax,
        record_actions: 2,
        series_stride: 1,
    }
}

fn thermalize_defaults(gamma_min: f64, dt: f64) -> ThermalizeParams {
    // Three damping times of the slowest mode.
    let steps = (3.0 / gamma_min / dt).round() as usize;
    ThermalizeParams {
        n_traj: 1000,
        steps,
        series_stride: 500,
    }
}

fn thermalize() -> ExperimentPreset {
    ExperimentPreset {
        name: PresetName::Thermalize,
        thermalize: thermalize_defaults(GAMMA, DT),
        ..single_quadratic()
    }
}

fn single_quadratic() -> ExperimentPreset {
    ExperimentPreset {
        name: PresetName::SingleQuadratic,
        seed: DEFAULT_SEED,
        dt: DT,
        modes: single_mode(1e-8),
        actuation: ActuationParams {
            regime: Regime::QuadraticCavity,
            n_actions: 11,
            kappa: 10.0,
            full_scale: 0.5e7,
            response: CavityResponse::Steady,
        },
        training: TrainingParams {
            batch_size: 80,
            epochs: 400,
            steps: 4000,
            eta: 0.00008,
            reward_scale: 1.0,
            layer_sizes: PolicyParams::SINGLE_MODE_LAYERS.to_vec(),
            checkpoint_every: 50,
        },
        evaluation: evaluation_defaults(),
        thermalize: thermalize_defaults(GAMMA, DT),
    }
}

fn four_linear() -> ExperimentPreset {
    let omega = [1.0, 0.8, 1.2, 0.6];
    let gamma = [4e-5, 3e-5, 5e-5, 2e-5];
    let g = [0.3, 0.2, 0.4, 0.3];
    let modes = ModeSet::new(
        (0..4)
            .map(|j| ModeParams {
                omega: omega[j],
                gamma: gamma[j],
                nbar: NBAR,
                g: g[j],
            })
            .collect(),
    )
    .expect("valid preset modes");
    ExperimentPreset {
        name: PresetName::FourLinear,
        seed: DEFAULT_SEED,
        dt: DT,
        modes,
        actuation: ActuationParams {
            regime: Regime::DirectForce,
            n_actions: 11,
            kappa: 10.0,
            full_scale: 1.0,
            response: CavityResponse::Steady,
        },
        training: TrainingParams {
            batch_size: 80,
            epochs: 400,
            steps: 4000,
            eta: 0.0006,
            reward_scale: 1.0,
            layer_sizes: PolicyParams::FOUR_MODE_LAYERS.to_vec(),
            checkpoint_every: 50,
        },
        evaluation: evaluation_defaults(),
        thermalize: thermalize_defaults(2e-5, DT),
    }
}
