//! Dense softmax policy with hand-written backpropagation and Adam.
//!
//! All weights and biases live in one flat vector, layer by layer. Each layer
//! stores its weight matrix row-major (one row per output neuron) followed by
//! its bias vector. Gradients and Adam moments use the same layout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::NoiseSource;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Extra scale on the initial output-layer weights.
pub const OUTPUT_GAIN: f64 = 0.01;

/// Weights, biases and Adam state of the policy network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    layer_sizes: Vec<usize>,
    theta: Vec<f64>,
    adam_m: Vec<f64>,
    adam_v: Vec<f64>,
    adam_t: u64,
}

/// Flat vector with the same layout as [`PolicyParams::theta`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient(pub Vec<f64>);

impl Gradient {
    pub fn zeros(len: usize) -> Self {
        Gradient(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &Gradient, scale: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += scale * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Softmax output: a point on the probability simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionDistribution {
    pub probs: Vec<f64>,
}

impl ActionDistribution {
    pub fn uniform(n: usize) -> Self {
        ActionDistribution {
            probs: vec![1.0 / n as f64; n],
        }
    }

    /// Numerically safe softmax of `logits`.
    pub fn from_logits(logits: &[f64]) -> Self {
        let mut probs = logits.to_vec();
        softmax_in_place(&mut probs);
        ActionDistribution { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

fn softmax_in_place(x: &mut [f64]) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in x.iter_mut() {
        *v /= sum;
    }
}

/// Scratch buffers for one forward/backward pass. Reusing one per rollout
/// avoids allocating on every step.
#[derive(Clone, Debug)]
pub struct Workspace {
    /// `acts[0]` is the input, `acts[l]` the output of layer `l`. The last
    /// entry holds the logits after the affine map and the probabilities
    /// once the softmax has run.
    acts: Vec<Vec<f64>>,
    logits: Vec<f64>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    pub fn new(layer_sizes: &[usize]) -> Self {
        Workspace {
            acts: layer_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            logits: vec![0.0; *layer_sizes.last().unwrap_or(&0)],
            deltas: layer_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn probs(&self) -> &[f64] {
        self.acts.last().expect("at least two layers")
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }
}

impl PolicyParams {
    /// Default network for one observed mode.
    pub const SINGLE_MODE_LAYERS: [usize; 4] = [2, 60, 60, 11];
    /// Default network for the collective observation of four modes.
    pub const FOUR_MODE_LAYERS: [usize; 4] = [2, 100, 100, 11];

    pub fn n_params_for(layer_sizes: &[usize]) -> usize {
        layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
        if layer_sizes.len() < 2 {
            return Err(Error::invalid("a network needs an input and an output layer"));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::invalid(format!("layer sizes must be positive, got {layer_sizes:?}")));
        }
        Ok(())
    }

    /// Gaussian weights with standard deviation `1/sqrt(fan_in)` in the
    /// hidden layers and `OUTPUT_GAIN/sqrt(fan_in)` in the output layer,
    /// zero biases, zero Adam moments.
    ///
    /// Observations are raw quadratures of order `sqrt(2 nbar)`, so without
    /// the output gain the initial softmax is already close to one-hot and
    /// the score function nearly vanishes.
    pub fn init<R: NoiseSource>(layer_sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut params = PolicyParams::zeros(layer_sizes)?;
        let n_layers = layer_sizes.len() - 1;
        let mut offset = 0;
        for (l, w) in layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let gain = if l + 1 == n_layers { OUTPUT_GAIN } else { 1.0 };
            let scale = gain / (fan_in as f64).sqrt();
            for x in &mut params.theta[offset..offset + fan_in * fan_out] {
                *x = scale * rng.standard_normal();
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(params)
    }

    /// All parameters zero: the policy is uniform for every observation.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        PolicyParams::validate_sizes(layer_sizes)?;
        let n = PolicyParams::n_params_for(layer_sizes);
        Ok(PolicyParams {
            layer_sizes: layer_sizes.to_vec(),
            theta: vec![0.0; n],
            adam_m: vec![0.0; n],
            adam_v: vec![0.0; n],
            adam_t: 0,
        })
    }

    /// Reassemble from raw parts, checking every shape.
    pub fn from_parts(
        layer_sizes: Vec<usize>,
        theta: Vec<f64>,
        adam_m: Vec<f64>,
        adam_v: Vec<f64>,
        adam_t: u64,
    ) -> Result<Self> {
        PolicyParams::validate_sizes(&layer_sizes)?;
        let n = PolicyParams::n_params_for(&layer_sizes);
        for (what, len) in [("theta", theta.len()), ("adam_m", adam_m.len()), ("adam_v", adam_v.len())] {
            if len != n {
                return Err(Error::LengthMismatch {
                    what,
                    expected: n,
                    actual: len,
                });
            }
        }
        let params = PolicyParams {
            layer_sizes,
            theta,
            adam_m,
            adam_v,
            adam_t,
        };
        if !params.is_finite() {
            return Err(Error::NonFinite {
                context: "policy parameters".into(),
            });
        }
        Ok(params)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        self.layer_sizes[self.layer_sizes.len() - 1]
    }

    pub fn n_params(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn adam_m(&self) -> &[f64] {
        &self.adam_m
    }

    pub fn adam_v(&self) -> &[f64] {
        &self.adam_v
    }

    pub fn adam_t(&self) -> u64 {
        self.adam_t
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().chain(&self.adam_m).chain(&self.adam_v).all(|x| x.is_finite())
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::new(&self.layer_sizes)
    }

    fn check_input(&self, obs: &[f64]) -> Result<()> {
        if obs.len() != self.input_size() {
            return Err(Error::LengthMismatch {
                what: "observation",
                expected: self.input_size(),
                actual: obs.len(),
            });
        }
        Ok(())
    }

    /// Forward pass into `ws`; the probabilities end up in `ws.probs()`.
    pub fn forward_into(&self, obs: &[f64], ws: &mut Workspace) -> Result<()> {
        self.check_input(obs)?;
        ws.acts[0].copy_from_slice(obs);
        let n_layers = self.layer_sizes.len() - 1;
        let mut offset = 0;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let weights = &self.theta[offset..offset + fan_in * fan_out];
            let biases = &self.theta[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            let (before, after) = ws.acts.split_at_mut(l + 1);
            let input = &before[l];
            let output = &mut after[0];
            let hidden = l + 1 < n_layers;
            for (i, out) in output.iter_mut().enumerate() {
                let row = &weights[i * fan_in..(i + 1) * fan_in];
                let z = row.iter().zip(input.iter()).fold(biases[i], |acc, (w, x)| acc + w * x);
                *out = if hidden { z.max(0.0) } else { z };
            }
            offset += fan_in * fan_out + fan_out;
        }
        ws.logits.copy_from_slice(&ws.acts[n_layers]);
        softmax_in_place(&mut ws.acts[n_layers]);
        Ok(())
    }

    pub fn forward(&self, obs: &[f64]) -> Result<ActionDistribution> {
        let mut ws = self.workspace();
        self.forward_into(obs, &mut ws)?;
        Ok(ActionDistribution {
            probs: ws.probs().to_vec(),
        })
    }

    /// Output-layer values before the softmax.
    pub fn logits(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let mut ws = self.workspace();
        self.forward_into(obs, &mut ws)?;
        Ok(ws.logits)
    }

    /// Adds `scale * ∂ ln π(action | obs) / ∂θ` to `grad`, using the
    /// activations left in `ws` by [`forward_into`](Self::forward_into) for
    /// the same observation.
    pub fn accumulate_logprob_grad(&self, ws: &mut Workspace, action: usize, scale: f64, grad: &mut [f64]) -> Result<()> {
        let n_out = self.output_size();
        if action >= n_out {
            return Err(Error::ActionOutOfRange {
                index: action,
                size: n_out,
            });
        }
        if grad.len() != self.n_params() {
            return Err(Error::LengthMismatch {
                what: "gradient",
                expected: self.n_params(),
                actual: grad.len(),
            });
        }
        let n_layers = self.layer_sizes.len() - 1;
        {
            let probs = &ws.acts[n_layers];
            let delta = &mut ws.deltas[n_layers];
            for (k, (d, p)) in delta.iter_mut().zip(probs).enumerate() {
                *d = if k == action { 1.0 - p } else { -p };
            }
        }
        let mut offset = self.n_params();
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            offset -= fan_in * fan_out + fan_out;
            let weights = &self.theta[offset..offset + fan_in * fan_out];
            let (g_w, g_b) = grad[offset..offset + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
            let (d_lo, d_hi) = ws.deltas.split_at_mut(l + 1);
            let delta = &d_hi[0];
            let input = &ws.acts[l];
            for i in 0..fan_out {
                let d = scale * delta[i];
                if d == 0.0 {
                    continue;
                }
                g_b[i] += d;
                for (g, x) in g_w[i * fan_in..(i + 1) * fan_in].iter_mut().zip(input) {
                    *g += d * x;
                }
            }
            if l > 0 {
                // Back through the relu of layer l, subgradient 0 at 0.
                let prev = &mut d_lo[l];
                prev.iter_mut().for_each(|x| *x = 0.0);
                for i in 0..fan_out {
                    let d = delta[i];
                    if d == 0.0 {
                        continue;
                    }
                    for (p, w) in prev.iter_mut().zip(&weights[i * fan_in..(i + 1) * fan_in]) {
                        *p += w * d;
                    }
                }
                for (p, a) in prev.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
        }
        Ok(())
    }

    /// Gradient of `ln π(action | obs)` with respect to every parameter.
    pub fn logprob_grad(&self, obs: &[f64], action: usize) -> Result<Gradient> {
        let mut ws = self.workspace();
        self.forward_into(obs, &mut ws)?;
        let mut grad = Gradient::zeros(self.n_params());
        self.accumulate_logprob_grad(&mut ws, action, 1.0, &mut grad.0)?;
        Ok(grad)
    }

    /// Adam step in the ascent direction `grad`, with the standard moment
    /// constants and bias correction. Leaves `self` untouched on error.
    pub fn adam_update(&mut self, grad: &Gradient, eta: f64) -> Result<()> {
        if grad.len() != self.n_params() {
            return Err(Error::LengthMismatch {
                what: "gradient",
                expected: self.n_params(),
                actual: grad.len(),
            });
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be > 0, got {eta}")));
        }
        if !grad.0.iter().all(|g| g.is_finite()) {
            return Err(Error::NonFinite {
                context: "policy gradient".into(),
            });
        }
        self.adam_t += 1;
        let t = self.adam_t.min(i32::MAX as u64) as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        for (((theta, m), v), &g) in self
            .theta
            .iter_mut()
            .zip(self.adam_m.iter_mut())
            .zip(self.adam_v.iter_mut())
            .zip(&grad.0)
        {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *theta += eta * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
        }
        Ok(())
    }
}

/// Inverse-CDF draw from `dist`.
pub fn sample_action<R: NoiseSource>(dist: &ActionDistribution, rng: &mut R) -> usize {
    sample_index(&dist.probs, rng.uniform())
}

pub(crate) fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return k;
        }
    }
    // Rounding left the total just below u.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Most probable action; ties go to the smallest index.
pub fn argmax_action(dist: &ActionDistribution) -> usize {
    argmax_index(&dist.probs)
}

pub(crate) fn argmax_index(probs: &[f64]) -> usize {
    let mut best = 0;
    for (k, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = k;
        }
    }
    best
}
