use std::f64::consts::PI;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use crate::env::{ActionVec, Bounds, EnvSpec};
use crate::error::{invalid, Result};

pub const HIDDEN_LAYERS: [usize; 2] = [32, 32];
pub const ACTION_NOISE: f64 = 0.3;

/// Gaussian policy: `a ~ N(net(normalize(s)), sigma^2 I)`.
///
/// The network sees states mapped onto `[-1, 1]`; its output is the
/// unclipped action mean. Deterministic and sampled actions handed to an
/// environment are clipped to the action box.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    net: Mlp,
    sigma: f64,
    state_bounds: Bounds,
    action_bounds: Bounds,
}

impl Policy {
    /// `[d_S, 32, 32, d_A]` tanh network with Glorot initialization.
    pub fn new<R: Rng + ?Sized>(spec: &EnvSpec, rng: &mut R) -> Self {
        let mut sizes = vec![spec.state_dim()];
        sizes.extend(HIDDEN_LAYERS);
        sizes.push(spec.action_dim());
        Self::with_network(spec, Mlp::glorot(&sizes, rng), ACTION_NOISE)
    }

    pub fn with_network(spec: &EnvSpec, net: Mlp, sigma: f64) -> Self {
        assert_eq!(net.input_dim(), spec.state_dim());
        assert_eq!(net.output_dim(), spec.action_dim());
        assert!(sigma >= 0.0);
        Self {
            net,
            sigma,
            state_bounds: spec.state_bounds.clone(),
            action_bounds: spec.action_bounds.clone(),
        }
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn set_sigma(&mut self, sigma: f64) {
        assert!(sigma >= 0.0);
        self.sigma = sigma;
    }

    pub fn action_bounds(&self) -> &Bounds {
        &self.action_bounds
    }

    pub fn normalize(&self, state: &[f64]) -> Vec<f64> {
        self.state_bounds.normalize(state)
    }

    /// Unclipped mean action.
    pub fn mean(&self, state: &[f64]) -> Vec<f64> {
        self.net.forward(&self.normalize(state))
    }

    /// Deterministic head, clipped to the action box.
    pub fn forward(&self, state: &[f64]) -> ActionVec {
        self.action_bounds.clip(&self.mean(state))
    }

    /// Mean plus Gaussian noise, before clipping.
    pub fn sample_raw(&self, state: &[f64], rng: &mut dyn RngCore) -> ActionVec {
        let mut a = self.mean(state);
        if self.sigma > 0.0 {
            for v in &mut a {
                let z: f64 = StandardNormal.sample(rng);
                *v += self.sigma * z;
            }
        }
        a
    }

    pub fn sample(&self, state: &[f64], rng: &mut dyn RngCore) -> ActionVec {
        self.action_bounds.clip(&self.sample_raw(state, rng))
    }

    pub fn to_checkpoint(&self) -> PolicyCheckpoint {
        PolicyCheckpoint {
            layer_sizes: self.net.sizes().to_vec(),
            activation: "tanh".into(),
            layers: self
                .net
                .layers()
                .map(|(w, b)| LayerWeights {
                    weights: w.to_vec(),
                    biases: b.to_vec(),
                })
                .collect(),
            sigma: self.sigma,
            state_bounds: self.state_bounds.clone(),
            action_bounds: self.action_bounds.clone(),
        }
    }

    pub fn from_checkpoint(ckpt: &PolicyCheckpoint) -> Result<Self> {
        if ckpt.activation != "tanh" {
            return Err(invalid(format!("unsupported activation '{}'", ckpt.activation)));
        }
        let params: Vec<f64> = ckpt
            .layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect();
        let net = Mlp::from_params(&ckpt.layer_sizes, params)
            .ok_or_else(|| invalid("checkpoint weights do not match layer sizes"))?;
        if net.input_dim() != ckpt.state_bounds.dim() || net.output_dim() != ckpt.action_bounds.dim() {
            return Err(invalid("checkpoint bounds do not match layer sizes"));
        }
        Ok(Self {
            net,
            sigma: ckpt.sigma,
            state_bounds: ckpt.state_bounds.clone(),
            action_bounds: ckpt.action_bounds.clone(),
        })
    }
}

/// Log-density of `action` under `N(mean, sigma^2 I)`.
pub fn gaussian_log_prob(mean: &[f64], action: &[f64], sigma: f64) -> f64 {
    let k = mean.len() as f64;
    let sq: f64 = mean.iter().zip(action).map(|(m, a)| (a - m) * (a - m)).sum();
    -0.5 * sq / (sigma * sigma) - k * sigma.ln() - 0.5 * k * (2.0 * PI).ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerWeights {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// JSON policy checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyCheckpoint {
    pub layer_sizes: Vec<usize>,
    pub activation: String,
    pub layers: Vec<LayerWeights>,
    pub sigma: f64,
    pub state_bounds: Bounds,
    pub action_bounds: Bounds,
}
