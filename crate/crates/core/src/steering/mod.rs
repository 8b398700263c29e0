//! Local steering policies for tree expansion.
//!
//! Given the state being expanded and the (normalized) displacement towards
//! the sampled target, a [`Steering`] proposes an action. The learned mode
//! regresses actions on observed `(state, displacement)` pairs with
//! Bayesian linear regression over random Fourier features, and samples
//! from the posterior predictive. The random mode ignores its input.

mod blr;
mod rff;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::env::{ActionVec, Bounds, EnvSpec};
use crate::error::{invalid, Error};

pub use blr::BlrPosterior;
pub use rff::RffMap;

pub const FEATURES: usize = 300;
pub const LENGTHSCALE: f64 = 0.3;
pub const PRIOR_PRECISION: f64 = 0.1;
pub const NOISE_PRECISION: f64 = 1.0;

/// Regression input: a normalized state and a normalized displacement.
#[derive(Clone, Debug, PartialEq)]
pub struct SteeringInput {
    pub state: Vec<f64>,
    pub delta: Vec<f64>,
}

impl SteeringInput {
    pub fn new(state: Vec<f64>, delta: Vec<f64>) -> Self {
        debug_assert_eq!(state.len(), delta.len());
        Self { state, delta }
    }

    /// Input between two normalized states.
    pub fn between(from: &[f64], to: &[f64]) -> Self {
        Self {
            state: from.to_vec(),
            delta: to.iter().zip(from).map(|(t, f)| t - f).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.state.iter().chain(&self.delta).all(|v| v.is_finite())
    }

    pub fn concat(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(2 * self.state.len());
        x.extend_from_slice(&self.state);
        x.extend_from_slice(&self.delta);
        x
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SteeringMode {
    Learned,
    Random,
}

impl SteeringMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SteeringMode::Learned => "learned",
            SteeringMode::Random => "random",
        }
    }

    /// Fresh steering model for one exploration run.
    pub fn build<R: Rng + ?Sized>(self, spec: &EnvSpec, rng: &mut R) -> Box<dyn Steering> {
        match self {
            SteeringMode::Learned => Box::new(LearnedSteering::new(spec, rng)),
            SteeringMode::Random => Box::new(RandomSteering::new(spec.action_bounds.clone())),
        }
    }
}

impl fmt::Display for SteeringMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SteeringMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "learned" => Ok(SteeringMode::Learned),
            "random" => Ok(SteeringMode::Random),
            other => Err(invalid(format!("unknown steering mode '{other}'"))),
        }
    }
}

pub trait Steering: Send {
    fn mode(&self) -> SteeringMode;

    fn sample(&mut self, input: &SteeringInput, rng: &mut dyn RngCore) -> ActionVec;

    /// Feeds back an executed transition: `input.delta` is the realized
    /// displacement and `action` the action that produced it.
    fn update(&mut self, input: &SteeringInput, action: &[f64]);
}

/// Uniform draw from the action box.
pub fn random_steer<R: Rng + ?Sized>(bounds: &Bounds, rng: &mut R) -> ActionVec {
    bounds.sample_uniform(rng)
}

#[derive(Clone, Debug)]
pub struct RandomSteering {
    bounds: Bounds,
}

impl RandomSteering {
    pub fn new(bounds: Bounds) -> Self {
        Self { bounds }
    }
}

impl Steering for RandomSteering {
    fn mode(&self) -> SteeringMode {
        SteeringMode::Random
    }

    fn sample(&mut self, _input: &SteeringInput, rng: &mut dyn RngCore) -> ActionVec {
        random_steer(&self.bounds, rng)
    }

    fn update(&mut self, _input: &SteeringInput, _action: &[f64]) {}
}

#[derive(Clone, Debug)]
pub struct LearnedSteering {
    features: RffMap,
    posterior: BlrPosterior,
    bounds: Bounds,
}

impl LearnedSteering {
    pub fn new<R: Rng + ?Sized>(spec: &EnvSpec, rng: &mut R) -> Self {
        Self::with_hyperparameters(
            spec,
            FEATURES,
            LENGTHSCALE,
            PRIOR_PRECISION,
            NOISE_PRECISION,
            rng,
        )
    }

    pub fn with_hyperparameters<R: Rng + ?Sized>(
        spec: &EnvSpec,
        features: usize,
        lengthscale: f64,
        alpha: f64,
        beta: f64,
        rng: &mut R,
    ) -> Self {
        let features = RffMap::new(2 * spec.state_dim(), features, lengthscale, rng);
        let posterior = BlrPosterior::new(features.num_features(), spec.action_dim(), alpha, beta);
        Self {
            features,
            posterior,
            bounds: spec.action_bounds.clone(),
        }
    }

    pub fn features(&self) -> &RffMap {
        &self.features
    }

    pub fn posterior(&self) -> &BlrPosterior {
        &self.posterior
    }

    /// Unclipped posterior predictive mean and shared variance.
    pub fn predictive(&self, input: &SteeringInput) -> (Vec<f64>, f64) {
        self.posterior.predictive(&self.features.features(&input.concat()))
    }

    pub fn dump(&self) -> SteeringDump {
        let precision: Vec<Vec<f64>> = self
            .posterior
            .precision_matrix()
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        SteeringDump {
            alpha: self.posterior.alpha(),
            beta: self.posterior.beta(),
            lengthscale: self.features.lengthscale(),
            m: self.features.num_features(),
            frequencies: self.features.frequency_rows().map(<[f64]>::to_vec).collect(),
            phases: self.features.phases().to_vec(),
            heads: (0..self.posterior.outputs())
                .map(|j| HeadDump {
                    precision: precision.clone(),
                    b: self.posterior.mean_term(j).to_vec(),
                })
                .collect(),
        }
    }
}

impl Steering for LearnedSteering {
    fn mode(&self) -> SteeringMode {
        SteeringMode::Learned
    }

    fn sample(&mut self, input: &SteeringInput, rng: &mut dyn RngCore) -> ActionVec {
        let (means, variance) = self.predictive(input);
        let std = variance.sqrt();
        let raw: Vec<f64> = means
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(rng);
                m + std * z
            })
            .collect();
        self.bounds.clip(&raw)
    }

    fn update(&mut self, input: &SteeringInput, action: &[f64]) {
        let phi = self.features.features(&input.concat());
        self.posterior.update(&phi, action);
    }
}

/// JSON model dump of a learned steering policy.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SteeringDump {
    pub alpha: f64,
    pub beta: f64,
    pub lengthscale: f64,
    pub m: usize,
    pub frequencies: Vec<Vec<f64>>,
    pub phases: Vec<f64>,
    pub heads: Vec<HeadDump>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HeadDump {
    pub precision: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvId;
    use crate::seed::rng_from_seed;

    #[test]
    fn random_steer_stays_in_box_with_centered_mean() {
        let bounds = Bounds::new(vec![-2.0, 0.0], vec![2.0, 1.0]);
        let mut rng = rng_from_seed(1);
        let n = 100_000;
        let mut mean = [0.0; 2];
        for _ in 0..n {
            let a = random_steer(&bounds, &mut rng);
            assert!(bounds.contains(&a));
            mean[0] += a[0] / n as f64;
            mean[1] += a[1] / n as f64;
        }
        // std of the mean: width / sqrt(12 n)
        assert!(mean[0].abs() < 3.0 * 4.0 / (12.0 * n as f64).sqrt());
        assert!((mean[1] - 0.5).abs() < 3.0 / (12.0 * n as f64).sqrt());
    }

    #[test]
    fn degenerate_box_gives_constant() {
        let bounds = Bounds::new(vec![0.25], vec![0.25]);
        let mut rng = rng_from_seed(2);
        for _ in 0..10 {
            assert_eq!(random_steer(&bounds, &mut rng), vec![0.25]);
        }
    }

    #[test]
    fn untrained_predictive_moments() {
        let spec = EnvId::MountainCar.make().spec().clone();
        let mut rng = rng_from_seed(3);
        let model = LearnedSteering::new(&spec, &mut rng);
        let input = SteeringInput::new(vec![0.2, -0.1], vec![0.3, 0.05]);
        let phi = model.features().features(&input.concat());
        let (means, var) = model.predictive(&input);
        let expected_var = 1.0 / NOISE_PRECISION
            + phi.iter().map(|p| p * p).sum::<f64>() / PRIOR_PRECISION;
        assert_eq!(means, vec![0.0]);
        assert!((var - expected_var).abs() < 1e-10);

        // Empirical moments of the unclipped predictive draw.
        let n = 10_000;
        let (mut m1, mut m2) = (0.0, 0.0);
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let a = means[0] + var.sqrt() * z;
            m1 += a / n as f64;
            m2 += a * a / n as f64;
        }
        let emp_var = m2 - m1 * m1;
        assert!(m1.abs() < 0.05 * var.sqrt() * 3.0);
        assert!((emp_var / var - 1.0).abs() < 0.05);
    }

    #[test]
    fn samples_are_clipped_and_reproducible() {
        let spec = EnvId::Pendulum.make().spec().clone();
        let draw = |seed| {
            let mut rng = rng_from_seed(seed);
            let mut model = LearnedSteering::new(&spec, &mut rng);
            let input = SteeringInput::new(vec![0.0, 0.0], vec![0.5, 0.5]);
            (0..200).map(|_| model.sample(&input, &mut rng)[0]).collect::<Vec<_>>()
        };
        let a = draw(9);
        assert!(a.iter().all(|v| v.abs() <= 2.0));
        assert_eq!(a, draw(9));
        assert_ne!(a, draw(10));
    }

    #[test]
    fn learning_a_linear_map_reduces_error() {
        // Ground truth: a = 0.8 * delta_0 - 0.3 * state_1 on a 1-d action box
        // wide enough that clipping never binds.
        let mut spec = EnvId::MountainCar.make().spec().clone();
        spec.action_bounds = Bounds::new(vec![-100.0], vec![100.0]);
        let mut rng = rng_from_seed(4);
        let mut model = LearnedSteering::new(&spec, &mut rng);
        let truth = |inp: &SteeringInput| 0.8 * inp.delta[0] - 0.3 * inp.state[1];
        let draw_input = |rng: &mut crate::seed::SimRng| {
            SteeringInput::new(
                vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                vec![rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)],
            )
        };
        let test: Vec<SteeringInput> = (0..200).map(|_| draw_input(&mut rng)).collect();
        let error = |m: &LearnedSteering| {
            test.iter()
                .map(|inp| (m.predictive(inp).0[0] - truth(inp)).abs())
                .sum::<f64>()
                / test.len() as f64
        };
        let before = error(&model);
        for _ in 0..500 {
            let inp = draw_input(&mut rng);
            let y = truth(&inp);
            model.update(&inp, &[y]);
        }
        let after = error(&model);
        assert!(after < 0.5 * before, "before {before}, after {after}");
    }

    #[test]
    fn dump_has_per_head_fields() {
        let spec = EnvId::MountainCar.make().spec().clone();
        let mut rng = rng_from_seed(5);
        let mut model = LearnedSteering::with_hyperparameters(&spec, 16, 0.3, 0.1, 1.0, &mut rng);
        model.update(&SteeringInput::new(vec![0.0, 0.0], vec![0.1, 0.0]), &[0.5]);
        let dump = model.dump();
        assert_eq!(dump.m, 16);
        assert_eq!(dump.frequencies.len(), 16);
        assert_eq!(dump.frequencies[0].len(), 4);
        assert_eq!(dump.heads.len(), 1);
        assert_eq!(dump.heads[0].precision.len(), 16);
        let json = serde_json::to_value(&dump).unwrap();
        for key in ["alpha", "beta", "lengthscale", "m", "frequencies", "phases", "heads"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }
}
