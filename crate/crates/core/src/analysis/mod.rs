//! Random-walk hitting probabilities, simulation of noisy gradient descent
//! as a stochastic process, and the exponential failure-tail tools used to
//! bound exploration cost.

mod walk;

use serde::{Deserialize, Serialize};

pub use walk::{hit_fraction, simulate_blocked, simulate_sgd_process, Drift, RandomWalkConfig};

use crate::error::{Error, Result};

/// Probability that a `d`-dimensional random walk started at distance `big_r`
/// ever enters the ball of radius `r`: `(r / R)^(d - 2)`.
pub fn hitting_probability(r: f64, big_r: f64, d: usize) -> Result<f64> {
    if d < 3 {
        return Err(Error::Domain(format!("hitting probability needs d >= 3, got {d}")));
    }
    if !(r > 0.0 && r < big_r) || !big_r.is_finite() {
        return Err(Error::Domain(format!("need 0 < r < R, got r={r}, R={big_r}")));
    }
    Ok((r / big_r).powi(d as i32 - 2))
}

/// `sum_{k>=1} k a e^(-b k) = a / (4 sinh^2(b / 2))`, evaluated as
/// `a e^-b / (1 - e^-b)^2`.
pub fn sampling_complexity_bound(a: f64, b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::Domain(format!("decay rate must be positive, got {b}")));
    }
    if !(a >= 0.0) {
        return Err(Error::Domain(format!("amplitude must be non-negative, got {a}")));
    }
    let m = (-b).exp_m1();
    Ok(a * (-b).exp() / (m * m))
}

/// Failures observed at one exploration budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetOutcome {
    pub budget: u64,
    pub runs: usize,
    pub failures: usize,
}

impl BudgetOutcome {
    pub fn failure_fraction(&self) -> f64 {
        self.failures as f64 / self.runs as f64
    }
}

/// `failure ~ a e^(-b k)` fitted on budgets with at least one failure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub budgets: Vec<u64>,
    pub failure_fractions: Vec<f64>,
    pub a: f64,
    pub b: f64,
}

impl TailFit {
    pub fn predict(&self, k: f64) -> f64 {
        self.a * (-self.b * k).exp()
    }
}

/// Least-squares line through `(k, ln failure_fraction)`.
pub fn fit_failure_tail(outcomes: &[BudgetOutcome]) -> Result<TailFit> {
    if let Some(o) = outcomes.iter().find(|o| o.runs == 0 || o.failures > o.runs) {
        return Err(Error::InvalidInput(format!("bad counts at budget {}", o.budget)));
    }
    let usable: Vec<&BudgetOutcome> = outcomes.iter().filter(|o| o.failures > 0).collect();
    let mut distinct: Vec<u64> = usable.iter().map(|o| o.budget).collect();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need failures at 2 or more budgets, have {}",
            distinct.len()
        )));
    }
    let xs: Vec<f64> = usable.iter().map(|o| o.budget as f64).collect();
    let ys: Vec<f64> = usable.iter().map(|o| o.failure_fraction().ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Ok(TailFit {
        budgets: outcomes.iter().map(|o| o.budget).collect(),
        failure_fractions: outcomes.iter().map(BudgetOutcome::failure_fraction).collect(),
        a: intercept.exp(),
        b: -slope,
    })
}

/// Per-budget failure counts from the step at which each run first reached
/// the goal (`None` if it never did). A run with a larger budget replays
/// the same samples as one with a smaller budget, so it fails at budget `k`
/// exactly when it needed more than `k` steps.
pub fn failures_by_budget(steps_to_goal: &[Option<u64>], budgets: &[u64]) -> Vec<BudgetOutcome> {
    budgets
        .iter()
        .map(|&k| BudgetOutcome {
            budget: k,
            runs: steps_to_goal.len(),
            failures: steps_to_goal.iter().filter(|s| s.is_none_or(|s| s > k)).count(),
        })
        .collect()
}
