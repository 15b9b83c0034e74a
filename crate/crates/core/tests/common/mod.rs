#![allow(dead_code)]

use mechcool::actuation::Observation;
use mechcool::dynamics::ResonatorState;
use mechcool::policy::{sample_action, PolicyParams};
use mechcool::reinforce::{batch_gradient, BaselineState, TrajectoryRecord};
use mechcool::rng::{NoiseConfig, NoiseSource, StreamPurpose};

/// Two-armed bandit: one step per episode, constant observation, arm `k`
/// pays `MEANS[k]` plus Gaussian noise.
pub struct Bandit {
    pub means: [f64; 2],
    pub noise: f64,
}

pub const BANDIT_OBS: Observation = Observation { values: [1.0, -0.5] };
pub const BANDIT_LAYERS: [usize; 3] = [2, 8, 2];

impl Bandit {
    pub const fn standard() -> Self {
        Bandit {
            means: [0.2, 1.0],
            noise: 0.3,
        }
    }

    pub fn best_arm(&self) -> usize {
        if self.means[1] > self.means[0] {
            1
        } else {
            0
        }
    }

    pub fn episode<R: NoiseSource>(&self, params: &PolicyParams, rng: &mut R) -> TrajectoryRecord {
        let dist = params.forward(BANDIT_OBS.as_slice()).unwrap();
        let action = sample_action(&dist, rng);
        let reward = self.means[action] + self.noise * rng.standard_normal();
        TrajectoryRecord {
            observations: vec![BANDIT_OBS],
            actions: vec![action],
            rewards: vec![reward],
            total_reward: reward,
            final_state: ResonatorState::ground(1).unwrap(),
            initial_energy: 0.0,
        }
    }

    pub fn batch<R: NoiseSource>(&self, params: &PolicyParams, size: usize, rng: &mut R) -> Vec<TrajectoryRecord> {
        (0..size).map(|_| self.episode(params, rng)).collect()
    }

    pub fn best_prob(&self, params: &PolicyParams) -> f64 {
        params.forward(BANDIT_OBS.as_slice()).unwrap().probs[self.best_arm()]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BaselineKind {
    Zero,
    RunningMean,
}

/// Train on the bandit and return the final best-arm probability.
pub fn train_bandit(bandit: &Bandit, kind: BaselineKind, epochs: usize, batch: usize, eta: f64, seed: u64) -> f64 {
    let mut init = NoiseConfig::for_trajectory(seed, StreamPurpose::PolicyInit, 0, 0).rng();
    let mut params = PolicyParams::init(&BANDIT_LAYERS, &mut init).unwrap();
    let mut history = BaselineState::default();
    for epoch in 0..epochs {
        let mut rng = NoiseConfig::for_trajectory(seed, StreamPurpose::Training, epoch as u64, 0).rng();
        let records = bandit.batch(&params, batch, &mut rng);
        let mean = records.iter().map(|r| r.total_reward).sum::<f64>() / batch as f64;
        let running = history.update(mean);
        let b = match kind {
            BaselineKind::Zero => 0.0,
            BaselineKind::RunningMean => running,
        };
        let grad = batch_gradient(&records, &params, b).unwrap();
        params.adam_update(&grad, eta).unwrap();
    }
    bandit.best_prob(&params)
}

/// Records every draw from an inner source.
pub struct Recorder<R> {
    pub inner: R,
    pub uniforms: Vec<f64>,
    pub normals: Vec<f64>,
}

impl<R: NoiseSource> NoiseSource for Recorder<R> {
    fn uniform(&mut self) -> f64 {
        let u = self.inner.uniform();
        self.uniforms.push(u);
        u
    }

    fn standard_normal(&mut self) -> f64 {
        let z = self.inner.standard_normal();
        self.normals.push(z);
        z
    }
}

/// Replays prerecorded normals; panics if asked for a uniform.
pub struct Replay {
    pub normals: std::vec::IntoIter<f64>,
}

impl NoiseSource for Replay {
    fn uniform(&mut self) -> f64 {
        panic!("replay source holds only normals")
    }

    fn standard_normal(&mut self) -> f64 {
        self.normals.next().expect("replay exhausted")
    }
}

/// Straightforward reference forward pass: returns log-probabilities and
/// the smallest |pre-activation| seen in any hidden unit.
pub fn reference_log_probs(layers: &[usize], theta: &[f64], obs: &[f64]) -> (Vec<f64>, f64) {
    let mut x = obs.to_vec();
    let mut offset = 0;
    let mut closest_kink = f64::INFINITY;
    for l in 0..layers.len() - 1 {
        let (n_in, n_out) = (layers[l], layers[l + 1]);
        let w = &theta[offset..offset + n_in * n_out];
        let b = &theta[offset + n_in * n_out..offset + n_in * n_out + n_out];
        offset += n_in * n_out + n_out;
        let mut z = vec![0.0; n_out];
        for i in 0..n_out {
            z[i] = b[i] + (0..n_in).map(|k| w[i * n_in + k] * x[k]).sum::<f64>();
        }
        if l + 2 < layers.len() {
            for v in z.iter_mut() {
                closest_kink = closest_kink.min(v.abs());
                *v = v.max(0.0);
            }
        }
        x = z;
    }
    assert_eq!(offset, theta.len());
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    (x.iter().map(|v| v - lse).collect(), closest_kink)
}

/// Parameters with standard-normal entries, far from the default init.
pub fn random_params<R: NoiseSource>(layers: &[usize], rng: &mut R) -> PolicyParams {
    let mut p = PolicyParams::zeros(layers).unwrap();
    for t in p.theta_mut() {
        *t = rng.standard_normal();
    }
    p
}

