//! Episodic policy-gradient training.
//!
//! Each epoch draws a fresh batch of thermal initial conditions, rolls the
//! current policy out on every one of them, and applies a single Adam
//! ascent step along the batch-averaged score function weighted by
//! `R - b`. `R` is the undiscounted total reward of a trajectory and `b`
//! the mean of the epoch-mean rewards of all earlier epochs.

use serde::{Deserialize, Serialize};

use crate::actuation::{observe, Actuator, CavityState, Observation};
use crate::dynamics::{sample_initial_state, Control, ModeSet, ResonatorState};
use crate::error::{Error, Result};
use crate::policy::{argmax_index, sample_index, Gradient, PolicyParams, Workspace};
use crate::rng::{NoiseConfig, NoiseSource, StreamPurpose};

/// Reward for one step: `E0 - E_next` if the step lowered the energy,
/// otherwise zero (a step that leaves the energy unchanged earns nothing).
pub fn step_reward(e0: f64, e_t: f64, e_next: f64) -> f64 {
    if e_next < e_t {
        e0 - e_next
    } else {
        0.0
    }
}

/// How the policy output is turned into an action.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionMode {
    /// Draw from the softmax distribution (training).
    Sample,
    /// Take the most probable action (evaluation).
    Argmax,
}

impl std::str::FromStr for ActionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sample" => Ok(ActionMode::Sample),
            "argmax" => Ok(ActionMode::Argmax),
            other => Err(Error::Config(format!("unknown action mode `{other}` (expected sample|argmax)"))),
        }
    }
}

impl std::fmt::Display for ActionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ActionMode::Sample => "sample",
            ActionMode::Argmax => "argmax",
        })
    }
}

/// The controlled system: modes, actuator and integration step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub modes: ModeSet,
    pub actuator: Actuator,
    pub dt: f64,
}

impl Environment {
    pub fn new(modes: ModeSet, actuator: Actuator, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be > 0, got {dt}")));
        }
        Ok(Environment { modes, actuator, dt })
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actuator.n_actions()
    }

    fn check_policy(&self, params: &PolicyParams) -> Result<()> {
        if params.input_size() != Observation::LEN {
            return Err(Error::LengthMismatch {
                what: "policy input layer",
                expected: Observation::LEN,
                actual: params.input_size(),
            });
        }
        if params.output_size() != self.n_actions() {
            return Err(Error::LengthMismatch {
                what: "policy output layer",
                expected: self.n_actions(),
                actual: params.output_size(),
            });
        }
        Ok(())
    }
}

/// What happened during one step, handed to episode observers.
#[derive(Debug)]
pub struct StepInfo<'a> {
    pub step: usize,
    pub observation: Observation,
    pub action: usize,
    pub drive: f64,
    pub reward: f64,
    /// State after the step.
    pub state: &'a ResonatorState,
    /// Total energy after the step.
    pub energy: f64,
}

/// End-of-episode summary.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeSummary {
    pub initial_state: ResonatorState,
    pub final_state: ResonatorState,
    pub initial_energy: f64,
    pub total_reward: f64,
    /// Largest total energy reached at any step, including the start.
    pub max_energy: f64,
}

/// Roll the policy out from a given initial state, calling `on_step` after
/// every step.
///
/// A non-finite state stops the episode with [`Error::Diverged`].
#[allow(clippy::too_many_arguments)]
pub fn run_episode_from<R, F>(
    params: &PolicyParams,
    env: &Environment,
    initial: ResonatorState,
    steps: usize,
    rng: &mut R,
    mode: ActionMode,
    mut on_step: F,
) -> Result<EpisodeSummary>
where
    R: NoiseSource,
    F: FnMut(&StepInfo<'_>),
{
    env.check_policy(params)?;
    if initial.n_modes() != env.n_modes() {
        return Err(Error::LengthMismatch {
            what: "initial state",
            expected: env.n_modes(),
            actual: initial.n_modes(),
        });
    }
    let mut ws: Workspace = params.workspace();
    let mut control = Control::zero(env.n_modes());
    let mut cavity: CavityState = env.actuator.initial_cavity();
    let mut state = initial.clone();
    let e0 = state.total_energy();
    let mut e_t = e0;
    let mut total_reward = 0.0;
    let mut max_energy = e0;

    for step in 0..steps {
        let observation = observe(&state, &env.modes);
        params.forward_into(observation.as_slice(), &mut ws)?;
        let action = match mode {
            ActionMode::Sample => sample_index(ws.probs(), rng.uniform()),
            ActionMode::Argmax => argmax_index(ws.probs()),
        };
        let drive = env.actuator.actuate(action, &mut cavity, &env.modes, env.dt, &mut control)?;
        state
            .evolve(&env.modes, &control, env.dt, rng)
            .map_err(|e| Error::Diverged {
                step,
                reason: e.to_string(),
            })?;
        let e_next = state.total_energy();
        if !e_next.is_finite() {
            return Err(Error::Diverged {
                step,
                reason: "energy is not finite".into(),
            });
        }
        let reward = step_reward(e0, e_t, e_next);
        total_reward += reward;
        max_energy = max_energy.max(e_next);
        on_step(&StepInfo {
            step,
            observation,
            action,
            drive,
            reward,
            state: &state,
            energy: e_next,
        });
        e_t = e_next;
    }
    Ok(EpisodeSummary {
        initial_state: initial,
        final_state: state,
        initial_energy: e0,
        total_reward,
        max_energy,
    })
}

/// Draw a thermal initial state from `rng` and roll out from it.
pub fn run_episode<R, F>(
    params: &PolicyParams,
    env: &Environment,
    steps: usize,
    rng: &mut R,
    mode: ActionMode,
    on_step: F,
) -> Result<EpisodeSummary>
where
    R: NoiseSource,
    F: FnMut(&StepInfo<'_>),
{
    let initial = sample_initial_state(&env.modes, rng);
    run_episode_from(params, env, initial, steps, rng, mode, on_step)
}

/// Everything the gradient estimator needs from one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub observations: Vec<Observation>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub total_reward: f64,
    pub final_state: ResonatorState,
    pub initial_energy: f64,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Roll out one trajectory from a fresh thermal state and record it.
pub fn rollout<R: NoiseSource>(
    params: &PolicyParams,
    env: &Environment,
    steps: usize,
    rng: &mut R,
    mode: ActionMode,
) -> Result<TrajectoryRecord> {
    let mut observations = Vec::with_capacity(steps);
    let mut actions = Vec::with_capacity(steps);
    let mut rewards = Vec::with_capacity(steps);
    let summary = run_episode(params, env, steps, rng, mode, |info| {
        observations.push(info.observation);
        actions.push(info.action);
        rewards.push(info.reward);
    })?;
    Ok(TrajectoryRecord {
        observations,
        actions,
        rewards,
        total_reward: summary.total_reward,
        final_state: summary.final_state,
        initial_energy: summary.initial_energy,
    })
}

/// Score-function estimate of the ascent direction,
/// `(1/B) Σ_traj (R - b) Σ_t ∂θ ln π(a_t | s_t)`.
pub fn batch_gradient(batch: &[TrajectoryRecord], params: &PolicyParams, baseline: f64) -> Result<Gradient> {
    if batch.is_empty() {
        return Err(Error::invalid("cannot estimate a gradient from an empty batch"));
    }
    if !baseline.is_finite() {
        return Err(Error::NonFinite {
            context: "baseline".into(),
        });
    }
    let mut grad = Gradient::zeros(params.n_params());
    let mut ws = params.workspace();
    let weight = 1.0 / batch.len() as f64;
    for traj in batch {
        let advantage = (traj.total_reward - baseline) * weight;
        if advantage == 0.0 {
            continue;
        }
        for (obs, &action) in traj.observations.iter().zip(&traj.actions) {
            params.forward_into(obs.as_slice(), &mut ws)?;
            params.accumulate_logprob_grad(&mut ws, action, advantage, &mut grad.0)?;
        }
    }
    Ok(grad)
}

/// Epoch-mean rewards of all completed epochs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BaselineState {
    pub epoch_mean_rewards: Vec<f64>,
}

impl BaselineState {
    /// Baseline for the next epoch: mean of the history, or 0 when empty.
    pub fn current(&self) -> f64 {
        if self.epoch_mean_rewards.is_empty() {
            0.0
        } else {
            self.epoch_mean_rewards.iter().sum::<f64>() / self.epoch_mean_rewards.len() as f64
        }
    }

    /// Returns the baseline to use for the epoch whose mean reward is
    /// `epoch_mean`, then records that mean.
    pub fn update(&mut self, epoch_mean: f64) -> f64 {
        let b = self.current();
        self.epoch_mean_rewards.push(epoch_mean);
        b
    }
}

/// Functional form of [`BaselineState::update`].
pub fn update_baseline(state: &BaselineState, epoch_mean: f64) -> (BaselineState, f64) {
    let mut next = state.clone();
    let b = next.update(epoch_mean);
    (next, b)
}

/// Training hyperparameters and the environment they apply to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub epochs: u64,
    pub steps: usize,
    pub eta: f64,
    pub reward_scale: f64,
    pub layer_sizes: Vec<usize>,
    pub env: Environment,
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps per trajectory must be >= 1"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be > 0, got {}", self.eta)));
        }
        if !self.reward_scale.is_finite() {
            return Err(Error::invalid("reward scale must be finite"));
        }
        if self.layer_sizes.first() != Some(&Observation::LEN) || self.layer_sizes.last() != Some(&self.env.n_actions()) {
            return Err(Error::invalid(format!(
                "layer sizes {:?} do not match {} inputs and {} actions",
                self.layer_sizes,
                Observation::LEN,
                self.env.n_actions()
            )));
        }
        Ok(())
    }
}

/// One row of the learning curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: u64,
    pub mean_total_reward: f64,
    pub baseline: f64,
}

/// Resumable training state. Epoch `e` (0-based) uses the training streams
/// `(seed, Training, e, i)` for trajectory `i`, so a trainer rebuilt from
/// its parameters, baseline history and epoch counter continues exactly as
/// the original would have.
#[derive(Clone, Debug)]
pub struct Trainer {
    config: TrainingConfig,
    params: PolicyParams,
    baseline: BaselineState,
    seed: u64,
    epoch: u64,
}

impl Trainer {
    pub fn new(config: TrainingConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = NoiseConfig::for_trajectory(seed, StreamPurpose::PolicyInit, 0, 0).rng();
        let params = PolicyParams::init(&config.layer_sizes, &mut rng)?;
        Ok(Trainer {
            config,
            params,
            baseline: BaselineState::default(),
            seed,
            epoch: 0,
        })
    }

    pub fn resume(
        config: TrainingConfig,
        params: PolicyParams,
        baseline: BaselineState,
        seed: u64,
        epoch: u64,
    ) -> Result<Self> {
        config.validate()?;
        config.env.check_policy(&params)?;
        if params.layer_sizes() != config.layer_sizes.as_slice() {
            return Err(Error::invalid(format!(
                "checkpoint layers {:?} differ from configured {:?}",
                params.layer_sizes(),
                config.layer_sizes
            )));
        }
        if baseline.epoch_mean_rewards.len() as u64 != epoch {
            return Err(Error::invalid(format!(
                "baseline history has {} entries for epoch {epoch}",
                baseline.epoch_mean_rewards.len()
            )));
        }
        Ok(Trainer {
            config,
            params,
            baseline,
            seed,
            epoch,
        })
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.config
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    pub fn baseline(&self) -> &BaselineState {
        &self.baseline
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of completed epochs.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.config.epochs
    }

    /// Learning curve of all completed epochs, rebuilt from the baseline
    /// history.
    pub fn learning_curve(&self) -> Vec<EpochRecord> {
        learning_curve_from_history(&self.baseline.epoch_mean_rewards)
    }

    /// The batch epoch `epoch` trains on, for inspection and tests.
    pub fn collect_batch(&self, epoch: u64) -> Result<Vec<TrajectoryRecord>> {
        (0..self.config.batch_size)
            .map(|i| {
                let mut rng = NoiseConfig::for_trajectory(self.seed, StreamPurpose::Training, epoch, i as u64).rng();
                rollout(&self.params, &self.config.env, self.config.steps, &mut rng, ActionMode::Sample)
            })
            .collect()
    }

    /// Run one epoch. On error the trainer is left unchanged.
    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        let epoch = self.epoch;
        self.try_epoch().map_err(|e| Error::TrainingAborted {
            epoch: epoch + 1,
            source: Box::new(e),
        })
    }

    fn try_epoch(&mut self) -> Result<EpochRecord> {
        let batch = self.collect_batch(self.epoch)?;
        let mean = batch.iter().map(|t| t.total_reward).sum::<f64>() / batch.len() as f64;
        let (baseline, b) = update_baseline(&self.baseline, mean);
        let mut grad = batch_gradient(&batch, &self.params, b)?;
        if self.config.reward_scale != 1.0 {
            grad.0.iter_mut().for_each(|g| *g *= self.config.reward_scale);
        }
        let mut params = self.params.clone();
        params.adam_update(&grad, self.config.eta)?;
        if !params.is_finite() {
            return Err(Error::NonFinite {
                context: "policy parameters after update".into(),
            });
        }
        self.params = params;
        self.baseline = baseline;
        self.epoch += 1;
        Ok(EpochRecord {
            epoch: self.epoch,
            mean_total_reward: mean,
            baseline: b,
        })
    }

    pub fn into_params(self) -> PolicyParams {
        self.params
    }
}

/// Learning-curve rows implied by a sequence of epoch-mean rewards.
pub fn learning_curve_from_history(history: &[f64]) -> Vec<EpochRecord> {
    let mut baseline = BaselineState::default();
    history
        .iter()
        .enumerate()
        .map(|(i, &mean)| EpochRecord {
            epoch: i as u64 + 1,
            mean_total_reward: mean,
            baseline: baseline.update(mean),
        })
        .collect()
}

/// Train for `config.epochs` epochs from a freshly initialised policy.
pub fn train(config: TrainingConfig, seed: u64) -> Result<(PolicyParams, Vec<EpochRecord>)> {
    let mut trainer = Trainer::new(config, seed)?;
    let mut curve = Vec::new();
    while !trainer.is_done() {
        curve.push(trainer.run_epoch()?);
    }
    Ok((trainer.into_params(), curve))
}
