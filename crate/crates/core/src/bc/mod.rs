//! Behavior cloning: supervised regression of demonstration actions on
//! normalized demonstration states.

mod mlp;
mod policy;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use crate::planner::DemoSet;
pub use mlp::{ForwardCache, Mlp};
pub use policy::{gaussian_log_prob, LayerWeights, Policy, PolicyCheckpoint, ACTION_NOISE, HIDDEN_LAYERS};

use crate::env::EnvSpec;
use crate::error::{invalid, Error, Result};
use crate::seed::rng_from_seed;

/// Number of demonstrations collected for cloning by default.
pub const DEFAULT_DEMOS: usize = 10;

/// `(normalized state, action)` regression pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// One pair per transition, in trajectory order.
pub fn build_dataset(demos: &DemoSet, spec: &EnvSpec) -> Result<Dataset> {
    if demos.transitions() == 0 {
        return Err(invalid("demo set has no transitions"));
    }
    let mut data = Dataset::default();
    for traj in &demos.trajectories {
        for (s, a) in traj.states.iter().zip(&traj.actions) {
            if s.len() != spec.state_dim() || a.len() != spec.action_dim() {
                return Err(invalid("demo dimensions do not match the environment"));
            }
            if !spec.action_bounds.contains(a) || s.iter().any(|v| !v.is_finite()) {
                return Err(invalid("demo transition outside the environment bounds"));
            }
            data.inputs.push(spec.state_bounds.normalize(s));
            data.targets.push(a.clone());
        }
    }
    Ok(data)
}

/// Mean over pairs of the per-dimension mean squared error of the
/// unclipped network output.
pub fn mse_loss(net: &Mlp, data: &Dataset) -> f64 {
    let k = net.output_dim() as f64;
    let total: f64 = data
        .inputs
        .iter()
        .zip(&data.targets)
        .map(|(x, y)| net.forward(x).iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / k)
        .sum();
    total / data.len() as f64
}

/// Loss and gradient of [`mse_loss`] restricted to `batch`.
pub fn mse_gradient(net: &Mlp, data: &Dataset, batch: &[usize]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; net.num_params()];
    let scale = 1.0 / (batch.len() * net.output_dim()) as f64;
    let mut loss = 0.0;
    for &i in batch {
        let cache = net.forward_cached(&data.inputs[i]);
        let diff: Vec<f64> = cache.output().iter().zip(&data.targets[i]).map(|(p, t)| p - t).collect();
        loss += diff.iter().map(|d| d * d).sum::<f64>() * scale;
        let g_out: Vec<f64> = diff.iter().map(|d| 2.0 * d * scale).collect();
        net.backward(&cache, &g_out, &mut grad);
    }
    (loss, grad)
}

/// Adam optimizer state.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BcConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BcReport {
    pub initial_loss: f64,
    /// Full-dataset loss after each epoch.
    pub losses: Vec<f64>,
}

impl BcReport {
    pub fn final_loss(&self) -> f64 {
        self.losses.last().copied().unwrap_or(self.initial_loss)
    }
}

/// Trains the policy mean by mini-batch Adam on shuffled pairs.
pub fn train_bc(policy: &mut Policy, data: &Dataset, config: &BcConfig) -> Result<BcReport> {
    if data.is_empty() {
        return Err(invalid("empty dataset"));
    }
    if config.batch_size == 0 || !(config.learning_rate > 0.0) {
        return Err(invalid("batch size and learning rate must be positive"));
    }
    let net = policy.net_mut();
    if data.inputs[0].len() != net.input_dim() || data.targets[0].len() != net.output_dim() {
        return Err(invalid("dataset dimensions do not match the network"));
    }
    let mut rng = rng_from_seed(config.seed);
    let mut adam = Adam::new(net.num_params(), config.learning_rate);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let initial_loss = mse_loss(net, data);
    let mut losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let (_, grad) = mse_gradient(net, data, batch);
            adam.step(net.params_mut(), &grad);
        }
        let loss = mse_loss(net, data);
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch, loss });
        }
        losses.push(loss);
    }
    Ok(BcReport { initial_loss, losses })
}

/// Means of consecutive `window`-epoch blocks of a loss curve; a trailing
/// partial block is dropped.
pub fn block_means(losses: &[f64], window: usize) -> Vec<f64> {
    losses
        .chunks_exact(window)
        .map(|c| c.iter().sum::<f64>() / window as f64)
        .collect()
}
