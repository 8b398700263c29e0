use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Random Fourier feature map approximating a squared-exponential kernel
/// `k(x, y) = exp(-|x - y|^2 / (2 l^2))`.
///
/// `phi(x) = sqrt(2/m) cos(W x + b)` with rows of `W` drawn from
/// `N(0, I / l^2)` and `b` uniform on `[0, 2 pi)`. Frozen after construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RffMap {
    lengthscale: f64,
    input_dim: usize,
    /// Row-major `m x input_dim`.
    frequencies: Vec<f64>,
    phases: Vec<f64>,
}

impl RffMap {
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        features: usize,
        lengthscale: f64,
        rng: &mut R,
    ) -> Self {
        assert!(lengthscale > 0.0 && features > 0 && input_dim > 0);
        let normal = Normal::new(0.0, 1.0 / lengthscale).expect("positive scale");
        let frequencies = (0..features * input_dim).map(|_| normal.sample(rng)).collect();
        let phases = (0..features).map(|_| rng.random_range(0.0..TAU)).collect();
        Self {
            lengthscale,
            input_dim,
            frequencies,
            phases,
        }
    }

    pub fn num_features(&self) -> usize {
        self.phases.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn frequency_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.frequencies.chunks(self.input_dim)
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_dim, "feature input dimension");
        let scale = (2.0 / self.num_features() as f64).sqrt();
        self.frequency_rows()
            .zip(&self.phases)
            .map(|(w, b)| {
                let proj: f64 = w.iter().zip(x).map(|(wi, xi)| wi * xi).sum();
                scale * (proj + b).cos()
            })
            .collect()
    }
}
