use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seed::{derive_seed, rng_from_seed};

/// Deterministic part `g` of the update.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Drift {
    /// Flat loss surface.
    Zero,
    /// Gradient of `0.5 |theta - center|^2`.
    Quadratic,
}

/// Parameters of `theta' = theta - lr * g(theta) + (lr / batch) * B dW`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomWalkConfig {
    pub start: Vec<f64>,
    pub center: Vec<f64>,
    /// Target ball radius.
    pub radius: f64,
    pub learning_rate: f64,
    pub batch_size: f64,
    /// Row-major `d x d` noise factor.
    pub noise_factor: Vec<f64>,
    pub drift: Drift,
    pub max_steps: u64,
}

impl RandomWalkConfig {
    /// Zero-drift walk with isotropic Gaussian steps of std `step_std`,
    /// started at distance `distance` from the origin along the first axis.
    pub fn isotropic(dim: usize, radius: f64, distance: f64, step_std: f64, max_steps: u64) -> Self {
        let mut start = vec![0.0; dim];
        if dim > 0 {
            start[0] = distance;
        }
        let mut noise_factor = vec![0.0; dim * dim];
        for i in 0..dim {
            noise_factor[i * dim + i] = step_std;
        }
        Self {
            start,
            center: vec![0.0; dim],
            radius,
            learning_rate: 1.0,
            batch_size: 1.0,
            noise_factor,
            drift: Drift::Zero,
            max_steps,
        }
    }

    pub fn dim(&self) -> usize {
        self.start.len()
    }

    /// Start distance `|center - start|`.
    pub fn start_distance(&self) -> f64 {
        distance(&self.start, &self.center)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 || self.center.len() != d || self.noise_factor.len() != d * d {
            return Err(invalid("walk dimensions are inconsistent"));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.start) || !finite(&self.center) || !finite(&self.noise_factor) {
            return Err(invalid("walk parameters must be finite"));
        }
        if !(self.radius > 0.0) {
            return Err(invalid("target radius must be positive"));
        }
        if !(self.start_distance() > self.radius) {
            return Err(invalid("walk must start outside the target ball"));
        }
        if !(self.learning_rate >= 0.0) || !(self.batch_size > 0.0) {
            return Err(invalid("learning rate must be non-negative and batch size positive"));
        }
        Ok(())
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Iterates the update until the walk enters the open target ball or hits
/// the step cap. Returns whether the ball was hit and the number of
/// updates made.
pub fn simulate_sgd_process(config: &RandomWalkConfig, rng: &mut dyn RngCore) -> Result<(bool, u64)> {
    config.validate()?;
    let d = config.dim();
    let noise_scale = config.learning_rate / config.batch_size;
    let noisy = noise_scale != 0.0 && config.noise_factor.iter().any(|&b| b != 0.0);
    let r2 = config.radius * config.radius;
    let mut theta = config.start.clone();
    let mut dw = vec![0.0; d];
    for step in 1..=config.max_steps {
        if config.drift == Drift::Quadratic {
            for (t, c) in theta.iter_mut().zip(&config.center) {
                *t -= config.learning_rate * (*t - c);
            }
        }
        if noisy {
            for w in dw.iter_mut() {
                *w = StandardNormal.sample(rng);
            }
            for (i, t) in theta.iter_mut().enumerate() {
                let row = &config.noise_factor[i * d..(i + 1) * d];
                *t += noise_scale * row.iter().zip(&dw).map(|(b, w)| b * w).sum::<f64>();
            }
        }
        let dist2: f64 = theta.iter().zip(&config.center).map(|(t, c)| (t - c) * (t - c)).sum();
        if dist2 < r2 {
            return Ok((true, step));
        }
    }
    Ok((false, config.max_steps))
}

/// Zero-drift walk advanced in blocks. The sum of `k` noise increments is
/// `sqrt(k)` times one increment, so block endpoints have the exact law of
/// the step-by-step walk. Blocks are sized so that the walk would have to
/// stray more than `6 sqrt(d)` block standard deviations to reach the
/// target inside a block, which bounds the chance of a skipped hit by about
/// `4 d Q(6)` (under 1e-8) per block. Near the target it falls back to
/// single steps. Returns `(hit, steps)` like [`simulate_sgd_process`].
pub fn simulate_blocked(config: &RandomWalkConfig, rng: &mut dyn RngCore) -> Result<(bool, u64)> {
    config.validate()?;
    if config.drift != Drift::Zero {
        return Err(invalid("block stepping needs a zero drift"));
    }
    let d = config.dim();
    let noise_scale = config.learning_rate / config.batch_size;
    let frobenius = config.noise_factor.iter().map(|b| b * b).sum::<f64>().sqrt();
    let sigma = noise_scale * frobenius;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return simulate_sgd_process(config, rng);
    }
    let margin = 6.0 * (d as f64).sqrt() * sigma;
    let r2 = config.radius * config.radius;
    let mut theta = config.start.clone();
    let mut dw = vec![0.0; d];
    let mut step = 0u64;
    while step < config.max_steps {
        let gap = distance(&theta, &config.center) - config.radius;
        let k = ((gap / margin).powi(2).floor() as u64).clamp(1, config.max_steps - step);
        let scale = noise_scale * (k as f64).sqrt();
        for w in dw.iter_mut() {
            *w = StandardNormal.sample(rng);
        }
        for (i, t) in theta.iter_mut().enumerate() {
            let row = &config.noise_factor[i * d..(i + 1) * d];
            *t += scale * row.iter().zip(&dw).map(|(b, w)| b * w).sum::<f64>();
        }
        step += k;
        let dist2: f64 = theta.iter().zip(&config.center).map(|(t, c)| (t - c) * (t - c)).sum();
        if dist2 < r2 {
            return Ok((true, step));
        }
    }
    Ok((false, config.max_steps))
}

/// Fraction of `walks` independent runs that hit the target, using block
/// stepping for zero-drift walks. Walk `i` uses
/// a generator seeded from `(seed, i)`, so the result does not depend on
/// how the runs are scheduled.
pub fn hit_fraction(config: &RandomWalkConfig, walks: usize, seed: u64) -> Result<f64> {
    config.validate()?;
    if walks == 0 {
        return Err(invalid("need at least one walk"));
    }
    let hits: usize = (0..walks)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(seed, i as u64));
            let (hit, _) = match config.drift {
                Drift::Zero => simulate_blocked(config, &mut rng),
                Drift::Quadratic => simulate_sgd_process(config, &mut rng),
            }
            .expect("validated");
            usize::from(hit)
        })
        .sum();
    Ok(hits as f64 / walks as f64)
}
