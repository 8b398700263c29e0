use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::rollout::RolloutBatch;
use crate::env::Bounds;

/// Ridge added to the normal equations when they are singular; grown
/// tenfold until the factorization succeeds.
pub const RIDGE: f64 = 1e-8;

/// Least-squares value baseline over `[s, s^2, t/H, (t/H)^2, (t/H)^3, 1]`
/// with `s` normalized to the state box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearBaseline {
    state_bounds: Bounds,
    horizon: usize,
    weights: Option<Vec<f64>>,
}

impl LinearBaseline {
    pub fn new(state_bounds: Bounds, horizon: usize) -> Self {
        assert!(horizon > 0);
        Self {
            state_bounds,
            horizon,
            weights: None,
        }
    }

    pub fn num_features(&self) -> usize {
        2 * self.state_bounds.dim() + 4
    }

    pub fn features(&self, state: &[f64], t: usize) -> Vec<f64> {
        let z = self.state_bounds.normalize(state);
        let u = t as f64 / self.horizon as f64;
        let mut f = Vec::with_capacity(self.num_features());
        f.extend_from_slice(&z);
        f.extend(z.iter().map(|v| v * v));
        f.extend([u, u * u, u * u * u, 1.0]);
        f
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// Regresses returns-to-go on the features of every visited state.
    pub fn fit(&mut self, batch: &RolloutBatch) {
        let mut rows = Vec::with_capacity(batch.timesteps());
        let mut targets = Vec::with_capacity(batch.timesteps());
        for ep in &batch.episodes {
            for (t, (s, g)) in ep.states.iter().zip(&ep.returns_to_go).enumerate() {
                rows.push(self.features(s, t));
                targets.push(*g);
            }
        }
        if !rows.is_empty() {
            self.weights = Some(least_squares(&rows, &targets));
        }
    }

    /// Zero before the first fit.
    pub fn predict(&self, state: &[f64], t: usize) -> f64 {
        match &self.weights {
            Some(w) => self.features(state, t).iter().zip(w).map(|(f, w)| f * w).sum(),
            None => 0.0,
        }
    }
}

/// Solves the normal equations by Cholesky, falling back to a growing
/// ridge when `X^T X` is not positive definite.
pub fn least_squares(rows: &[Vec<f64>], targets: &[f64]) -> Vec<f64> {
    let k = rows[0].len();
    let x = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
    let y = DVector::from_column_slice(targets);
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * y;
    let mut ridge = 0.0;
    loop {
        let mut a = xtx.clone();
        for i in 0..k {
            a[(i, i)] += ridge;
        }
        if let Some(chol) = a.cholesky() {
            let w = chol.solve(&xty);
            if w.iter().all(|v| v.is_finite()) {
                return w.iter().copied().collect();
            }
        }
        ridge = if ridge == 0.0 { RIDGE } else { ridge * 10.0 };
        if ridge > 1e6 {
            return vec![0.0; k];
        }
    }
}
