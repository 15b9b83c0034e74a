//! Classical Langevin dynamics of independent mechanical modes.
//!
//! Quadratures are dimensionless and energies are occupation numbers, so a
//! mode in equilibrium with its bath has mean energy close to `nbar`. Time is
//! measured in units of the inverse reference frequency.
//!
//! One integration step is a noise-free RK4 step of the drift with the
//! control held constant, followed by an Euler–Maruyama kick on the momenta.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::NoiseSource;

/// Physical constants of one mode.
///
/// `g` is the mode's coupling to the actuator. Its meaning depends on the
/// actuation regime: force per unit intensity (linear), frequency shift per
/// unit intensity (quadratic, the shift is `2 g I`) or a plain multiplication
/// factor on a directly applied force.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    pub omega: f64,
    pub gamma: f64,
    pub nbar: f64,
    pub g: f64,
}

impl ModeParams {
    pub fn new(omega: f64, gamma: f64, nbar: f64, g: f64) -> Result<Self> {
        let mode = ModeParams {
            omega,
            gamma,
            nbar,
            g,
        };
        mode.validate()?;
        Ok(mode)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::invalid(format!("omega must be > 0, got {}", self.omega)));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::invalid(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.nbar.is_finite() && self.nbar >= 0.0) {
            return Err(Error::invalid(format!("nbar must be >= 0, got {}", self.nbar)));
        }
        if !self.g.is_finite() {
            return Err(Error::invalid("coupling g must be finite"));
        }
        Ok(())
    }

    /// Momentum diffusion amplitude `sqrt((2 nbar + 1) gamma)`.
    pub fn diffusion(&self) -> f64 {
        ((2.0 * self.nbar + 1.0) * self.gamma).sqrt()
    }
}

/// A non-empty, validated collection of modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ModeParams>", into = "Vec<ModeParams>")]
pub struct ModeSet(Vec<ModeParams>);

impl ModeSet {
    pub fn new(modes: Vec<ModeParams>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::invalid("at least one mode is required"));
        }
        for m in &modes {
            m.validate()?;
        }
        Ok(ModeSet(modes))
    }

    pub fn single(mode: ModeParams) -> Result<Self> {
        ModeSet::new(vec![mode])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[ModeParams] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ModeParams> {
        self.0.iter()
    }

    pub fn with_nbar(mut self, nbar: f64) -> Result<Self> {
        for m in &mut self.0 {
            m.nbar = nbar;
        }
        ModeSet::new(self.0)
    }
}

impl TryFrom<Vec<ModeParams>> for ModeSet {
    type Error = Error;

    fn try_from(modes: Vec<ModeParams>) -> Result<Self> {
        ModeSet::new(modes)
    }
}

impl From<ModeSet> for Vec<ModeParams> {
    fn from(set: ModeSet) -> Self {
        set.0
    }
}

impl std::ops::Index<usize> for ModeSet {
    type Output = ModeParams;

    fn index(&self, i: usize) -> &ModeParams {
        &self.0[i]
    }
}

/// Position and momentum quadratures of all modes at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResonatorState {
    q: Vec<f64>,
    p: Vec<f64>,
    t: f64,
}

impl ResonatorState {
    pub fn new(q: Vec<f64>, p: Vec<f64>, t: f64) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::invalid("state needs at least one mode"));
        }
        if q.len() != p.len() {
            return Err(Error::LengthMismatch {
                what: "momentum quadratures",
                expected: q.len(),
                actual: p.len(),
            });
        }
        let state = ResonatorState { q, p, t };
        if !state.is_finite() {
            return Err(Error::NonFinite {
                context: "resonator state".into(),
            });
        }
        Ok(state)
    }

    /// All modes at rest at the origin.
    pub fn ground(n_modes: usize) -> Result<Self> {
        ResonatorState::new(vec![0.0; n_modes], vec![0.0; n_modes], 0.0)
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn n_modes(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.q.iter().chain(&self.p).all(|x| x.is_finite())
    }

    /// Energy of mode `j`, `(q² + p²) / 2`.
    #[inline]
    pub fn mode_energy(&self, j: usize) -> f64 {
        0.5 * (self.q[j] * self.q[j] + self.p[j] * self.p[j])
    }

    /// Sum of the mode energies.
    pub fn total_energy(&self) -> f64 {
        (0..self.n_modes()).map(|j| self.mode_energy(j)).sum()
    }

    fn check_len(&self, what: &'static str, len: usize) -> Result<()> {
        if len != self.n_modes() {
            return Err(Error::LengthMismatch {
                what,
                expected: self.n_modes(),
                actual: len,
            });
        }
        Ok(())
    }

    /// In-place RK4 step. See [`rk4_step`].
    pub fn rk4_advance(&mut self, modes: &ModeSet, control: &Control, dt: f64) -> Result<()> {
        self.check_len("modes", modes.len())?;
        self.check_len("forces", control.forces.len())?;
        self.check_len("frequency shifts", control.shifts.len())?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be > 0, got {dt}")));
        }
        // The drift is block-diagonal across modes, so a joint RK4 step is
        // exactly one 2x2 RK4 step per mode.
        for (j, m) in modes.iter().enumerate() {
            let (q, p) = rk4_mode(
                self.q[j],
                self.p[j],
                m.omega,
                m.omega + control.shifts[j],
                m.gamma,
                control.forces[j],
                dt,
            );
            if !(q.is_finite() && p.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("RK4 step of mode {j} at t={}", self.t),
                });
            }
            self.q[j] = q;
            self.p[j] = p;
        }
        self.t += dt;
        Ok(())
    }

    /// In-place thermal kick. See [`thermal_kick`].
    pub fn apply_thermal_kick<R: NoiseSource>(&mut self, modes: &ModeSet, dt: f64, rng: &mut R) {
        let sqrt_dt = dt.sqrt();
        for (j, m) in modes.iter().enumerate() {
            // Always draw, so the stream position does not depend on gamma.
            let xi = rng.standard_normal();
            self.p[j] += m.diffusion() * sqrt_dt * xi;
        }
    }

    /// In-place full step. See [`evolve_step`].
    pub fn evolve<R: NoiseSource>(
        &mut self,
        modes: &ModeSet,
        control: &Control,
        dt: f64,
        rng: &mut R,
    ) -> Result<()> {
        self.rk4_advance(modes, control, dt)?;
        self.apply_thermal_kick(modes, dt, rng);
        Ok(())
    }
}

/// Per-mode control held constant over one step: linear-regime forces and
/// quadratic-regime frequency shifts.
#[derive(Clone, Debug, PartialEq)]
pub struct Control {
    pub forces: Vec<f64>,
    pub shifts: Vec<f64>,
}

impl Control {
    pub fn zero(n_modes: usize) -> Self {
        Control {
            forces: vec![0.0; n_modes],
            shifts: vec![0.0; n_modes],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.forces.iter().chain(&self.shifts).all(|&x| x == 0.0)
    }
}

/// Time derivative of a [`ResonatorState`].
#[derive(Clone, Debug, PartialEq)]
pub struct StateDerivative {
    pub dq: Vec<f64>,
    pub dp: Vec<f64>,
}

#[inline]
fn drift_mode(q: f64, p: f64, omega: f64, omega_eff: f64, gamma: f64, force: f64) -> (f64, f64) {
    (omega * p, -omega_eff * q - gamma * p + force)
}

#[inline]
fn rk4_mode(q: f64, p: f64, omega: f64, omega_eff: f64, gamma: f64, force: f64, dt: f64) -> (f64, f64) {
    let f = |q, p| drift_mode(q, p, omega, omega_eff, gamma, force);
    let (k1q, k1p) = f(q, p);
    let (k2q, k2p) = f(q + 0.5 * dt * k1q, p + 0.5 * dt * k1p);
    let (k3q, k3p) = f(q + 0.5 * dt * k2q, p + 0.5 * dt * k2p);
    let (k4q, k4p) = f(q + dt * k3q, p + dt * k3p);
    (
        q + dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q),
        p + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
    )
}

/// Map two uniform deviates per mode onto a thermal initial condition.
///
/// `b[j]` selects the energy by inverting the exponential CDF with mean
/// `nbar_j`, `phi[j]` selects the phase-space angle.
pub fn initial_state_from_uniforms(modes: &ModeSet, b: &[f64], phi: &[f64]) -> Result<ResonatorState> {
    if b.len() != modes.len() || phi.len() != modes.len() {
        return Err(Error::LengthMismatch {
            what: "uniform deviates",
            expected: modes.len(),
            actual: b.len().min(phi.len()),
        });
    }
    let mut q = Vec::with_capacity(modes.len());
    let mut p = Vec::with_capacity(modes.len());
    for ((m, &bj), &phij) in modes.iter().zip(b).zip(phi) {
        let energy = -m.nbar * (-bj).ln_1p();
        let radius = (2.0 * energy).sqrt();
        let angle = TAU * phij;
        q.push(radius * angle.cos());
        p.push(radius * angle.sin());
    }
    ResonatorState::new(q, p, 0.0)
}

/// Draw a thermal initial condition: per mode an exponentially distributed
/// energy with mean `nbar` and a uniformly distributed phase.
///
/// Two uniforms are consumed per mode, energy first.
pub fn sample_initial_state<R: NoiseSource>(modes: &ModeSet, rng: &mut R) -> ResonatorState {
    let mut b = Vec::with_capacity(modes.len());
    let mut phi = Vec::with_capacity(modes.len());
    for _ in 0..modes.len() {
        b.push(rng.uniform());
        phi.push(rng.uniform());
    }
    initial_state_from_uniforms(modes, &b, &phi).expect("uniform deviates in [0, 1) give a finite state")
}

/// Per-mode and total energy in occupation-number units.
pub fn energy(state: &ResonatorState) -> (Vec<f64>, f64) {
    let per_mode: Vec<f64> = (0..state.n_modes()).map(|j| state.mode_energy(j)).collect();
    let total = per_mode.iter().sum();
    (per_mode, total)
}

/// Noise-free right-hand side of the equations of motion.
pub fn deterministic_drift(state: &ResonatorState, modes: &ModeSet, control: &Control) -> Result<StateDerivative> {
    state.check_len("modes", modes.len())?;
    state.check_len("forces", control.forces.len())?;
    state.check_len("frequency shifts", control.shifts.len())?;
    let (dq, dp) = modes
        .iter()
        .enumerate()
        .map(|(j, m)| {
            drift_mode(
                state.q[j],
                state.p[j],
                m.omega,
                m.omega + control.shifts[j],
                m.gamma,
                control.forces[j],
            )
        })
        .unzip();
    Ok(StateDerivative { dq, dp })
}

/// One classical fourth-order Runge–Kutta step of the drift, control held
/// constant. No noise.
pub fn rk4_step(state: &ResonatorState, modes: &ModeSet, control: &Control, dt: f64) -> Result<ResonatorState> {
    let mut next = state.clone();
    next.rk4_advance(modes, control, dt)?;
    Ok(next)
}

/// Add the thermal Wiener increment `sqrt((2 nbar + 1) gamma dt) N(0, 1)`
/// to each momentum. Positions are untouched.
pub fn thermal_kick<R: NoiseSource>(state: &ResonatorState, modes: &ModeSet, dt: f64, rng: &mut R) -> ResonatorState {
    let mut next = state.clone();
    next.apply_thermal_kick(modes, dt, rng);
    next
}

/// The environment transition: [`rk4_step`] followed by [`thermal_kick`].
pub fn evolve_step<R: NoiseSource>(
    state: &ResonatorState,
    modes: &ModeSet,
    control: &Control,
    dt: f64,
    rng: &mut R,
) -> Result<ResonatorState> {
    let mut next = state.clone();
    next.evolve(modes, control, dt, rng)?;
    Ok(next)
}
