//! Actions, the classical cavity field and the policy's observation.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Control, ModeSet, ResonatorState};
use crate::error::{Error, Result};

/// Reduced Planck constant in J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// How a drive level reaches the modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Cavity intensity pushes each mode with force `-g_j |α|²`.
    LinearCavity,
    /// Cavity intensity shifts each mode frequency by `2 g_j |α|²`.
    QuadraticCavity,
    /// The level is applied directly as a force amplitude `u`, `F_j = -g_j u`.
    DirectForce,
}

impl Regime {
    pub fn uses_cavity(self) -> bool {
        !matches!(self, Regime::DirectForce)
    }
}

/// Ordered drive levels selectable by the policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSet {
    levels: Vec<f64>,
    regime: Regime,
}

impl ActionSet {
    pub const DEFAULT_SIZE: usize = 11;

    pub fn new(levels: Vec<f64>, regime: Regime) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::invalid("an action set needs at least two levels"));
        }
        if levels[0] != 0.0 {
            return Err(Error::invalid("the first action level must be 0 (no drive)"));
        }
        if !levels.iter().all(|l| l.is_finite()) || levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("action levels must be finite and strictly increasing"));
        }
        Ok(ActionSet { levels, regime })
    }

    /// `size` levels evenly spaced on `[0, max_level]`.
    pub fn uniform(size: usize, max_level: f64, regime: Regime) -> Result<Self> {
        if size < 2 {
            return Err(Error::invalid("an action set needs at least two levels"));
        }
        let last = (size - 1) as f64;
        let levels = (0..size).map(|k| k as f64 / last * max_level).collect();
        ActionSet::new(levels, regime)
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn max_level(&self) -> f64 {
        self.levels[self.levels.len() - 1]
    }
}

/// Drive amplitude selected by an action index.
pub fn action_to_drive(action_index: usize, set: &ActionSet) -> Result<f64> {
    set.levels.get(action_index).copied().ok_or(Error::ActionOutOfRange {
        index: action_index,
        size: set.len(),
    })
}

/// Classical intracavity amplitude. Real for a resonant real drive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityState {
    pub alpha: f64,
    pub kappa: f64,
    pub drive: f64,
}

impl CavityState {
    pub fn empty(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::invalid(format!("kappa must be > 0, got {kappa}")));
        }
        Ok(CavityState {
            alpha: 0.0,
            kappa,
            drive: 0.0,
        })
    }

    pub fn intensity(&self) -> f64 {
        self.alpha * self.alpha
    }

    /// Amplitude the field relaxes to under the current drive.
    pub fn steady_state(&self) -> f64 {
        self.drive / self.kappa
    }
}

/// Exact solution of `dα/dt = -κ α + ε` over `dt` with `ε` held constant.
pub fn cavity_step(cavity: &CavityState, drive: f64, dt: f64) -> CavityState {
    let decay = (-cavity.kappa * dt).exp();
    CavityState {
        alpha: cavity.alpha * decay + drive / cavity.kappa * (1.0 - decay),
        kappa: cavity.kappa,
        drive,
    }
}

/// One-sided radiation-pressure forces `F_j = -g_j · intensity`.
pub fn linear_forces(intensity: f64, modes: &ModeSet) -> Vec<f64> {
    modes.iter().map(|m| -m.g * intensity).collect()
}

/// Parametric frequency shifts `Δω_j = 2 g_j · intensity`.
pub fn quadratic_shifts(intensity: f64, modes: &ModeSet) -> Vec<f64> {
    modes.iter().map(|m| 2.0 * m.g * intensity).collect()
}

/// Input vector of the policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub values: [f64; 2],
}

impl Observation {
    pub const LEN: usize = 2;

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

/// Collective position `Σ q_j` and velocity `Σ ω_j p_j`. For one mode this
/// is simply `(q, q̇)`.
pub fn observe(state: &ResonatorState, modes: &ModeSet) -> Observation {
    let q: f64 = state.q().iter().sum();
    let qdot: f64 = state.p().iter().zip(modes.iter()).map(|(p, m)| m.omega * p).sum();
    Observation { values: [q, qdot] }
}

/// Drive amplitude `sqrt(2 P0 κ_L / (ħ ω_c))` for input power `p0` (W),
/// input-mirror loss rate `kappa_l` (1/s) and cavity angular frequency
/// `omega_c` (rad/s).
pub fn power_to_drive(p0: f64, kappa_l: f64, omega_c: f64) -> Result<f64> {
    let valid = p0 >= 0.0 && kappa_l >= 0.0 && omega_c > 0.0;
    if !valid {
        return Err(Error::invalid("power and loss rate must be >= 0 and cavity frequency > 0"));
    }
    Ok((2.0 * p0 * kappa_l / (HBAR * omega_c)).sqrt())
}

/// How the cavity amplitude follows a change of drive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CavityResponse {
    /// The field sits at its steady state `ε/κ` immediately.
    Steady,
    /// The field relaxes through [`cavity_step`].
    Dynamic,
}

/// Turns action indices into per-mode controls, tracking the cavity field
/// when one is present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Actuator {
    pub actions: ActionSet,
    pub kappa: f64,
    pub response: CavityResponse,
}

impl Actuator {
    pub fn new(actions: ActionSet, kappa: f64, response: CavityResponse) -> Result<Self> {
        CavityState::empty(kappa)?;
        Ok(Actuator {
            actions,
            kappa,
            response,
        })
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn initial_cavity(&self) -> CavityState {
        CavityState {
            alpha: 0.0,
            kappa: self.kappa,
            drive: 0.0,
        }
    }

    /// Applies `action` for the coming step of length `dt`, advancing the
    /// cavity when it is dynamic, and writes the held control into `control`.
    ///
    /// A dynamic cavity is advanced first and the amplitude at the end of
    /// the step sets the intensity for the whole step.
    pub fn actuate(
        &self,
        action: usize,
        cavity: &mut CavityState,
        modes: &ModeSet,
        dt: f64,
        control: &mut Control,
    ) -> Result<f64> {
        let drive = action_to_drive(action, &self.actions)?;
        let intensity = match self.actions.regime {
            Regime::DirectForce => {
                cavity.drive = drive;
                drive
            }
            Regime::LinearCavity | Regime::QuadraticCavity => {
                *cavity = match self.response {
                    CavityResponse::Steady => CavityState {
                        alpha: drive / cavity.kappa,
                        kappa: cavity.kappa,
                        drive,
                    },
                    CavityResponse::Dynamic => cavity_step(cavity, drive, dt),
                };
                cavity.intensity()
            }
        };
        control.forces.clear();
        control.shifts.clear();
        for m in modes.iter() {
            let (f, s) = match self.actions.regime {
                Regime::LinearCavity | Regime::DirectForce => (-m.g * intensity, 0.0),
                Regime::QuadraticCavity => (0.0, 2.0 * m.g * intensity),
            };
            control.forces.push(f);
            control.shifts.push(s);
        }
        Ok(drive)
    }
}
