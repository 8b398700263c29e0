use serde::{Deserialize, Serialize};

use super::baseline::LinearBaseline;
use super::rollout::RolloutBatch;
use crate::bc::{gaussian_log_prob, Mlp, Policy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrpoConfig {
    pub kl_limit: f64,
    pub cg_iters: usize,
    pub cg_damping: f64,
    pub backtrack_coeff: f64,
    pub backtracks: usize,
}

impl Default for TrpoConfig {
    fn default() -> Self {
        Self {
            kl_limit: 0.01,
            cg_iters: 10,
            cg_damping: 1e-5,
            backtrack_coeff: 0.8,
            backtracks: 10,
        }
    }
}

/// Flattened on-policy samples for one update.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PgSamples {
    /// Normalized states.
    pub inputs: Vec<Vec<f64>>,
    /// Unclipped sampled actions.
    pub actions: Vec<Vec<f64>>,
    pub advantages: Vec<f64>,
    pub old_log_probs: Vec<f64>,
}

impl PgSamples {
    /// Advantages are returns-to-go minus the baseline, then normalized.
    pub fn from_batch(batch: &RolloutBatch, baseline: &LinearBaseline, policy: &Policy) -> Self {
        let mut out = Self::default();
        for ep in &batch.episodes {
            for t in 0..ep.len() {
                out.inputs.push(policy.normalize(&ep.states[t]));
                out.actions.push(ep.actions[t].clone());
                out.advantages.push(ep.returns_to_go[t] - baseline.predict(&ep.states[t], t));
                out.old_log_probs.push(ep.log_probs[t]);
            }
        }
        normalize_advantages(&mut out.advantages);
        out
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Shifts to mean zero and, when there is spread, scales to unit
/// (population) standard deviation.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if adv.len() > 1 && std > 1e-12 { 1.0 / std } else { 1.0 };
    for a in adv.iter_mut() {
        *a = (*a - mean) * scale;
    }
}

/// Importance-weighted surrogate `mean_i exp(log pi(a_i|s_i) - log pi_old) A_i`.
pub fn surrogate(net: &Mlp, sigma: f64, samples: &PgSamples) -> f64 {
    let total: f64 = (0..samples.len())
        .map(|i| {
            let mean = net.forward(&samples.inputs[i]);
            let lp = gaussian_log_prob(&mean, &samples.actions[i], sigma);
            (lp - samples.old_log_probs[i]).exp() * samples.advantages[i]
        })
        .sum();
    total / samples.len() as f64
}

/// Exact gradient of [`surrogate`] with respect to the network parameters.
pub fn surrogate_gradient(net: &Mlp, sigma: f64, samples: &PgSamples) -> Vec<f64> {
    let mut grad = vec![0.0; net.num_params()];
    let n = samples.len() as f64;
    for i in 0..samples.len() {
        let a = samples.advantages[i];
        if a == 0.0 {
            continue;
        }
        let cache = net.forward_cached(&samples.inputs[i]);
        let mean = cache.output();
        let lp = gaussian_log_prob(mean, &samples.actions[i], sigma);
        let w = (lp - samples.old_log_probs[i]).exp() * a / n;
        let g_out: Vec<f64> = mean
            .iter()
            .zip(&samples.actions[i])
            .map(|(m, act)| w * (act - m) / (sigma * sigma))
            .collect();
        net.backward(&cache, &g_out, &mut grad);
    }
    grad
}

/// Mean over samples of `KL(N(old, s^2 I) || N(new, s^2 I))`.
pub fn mean_kl(old_means: &[Vec<f64>], net: &Mlp, sigma: f64, samples: &PgSamples) -> f64 {
    let total: f64 = old_means
        .iter()
        .zip(&samples.inputs)
        .map(|(old, x)| {
            let new = net.forward(x);
            old.iter().zip(&new).map(|(o, n)| (o - n).powi(2)).sum::<f64>() / (2.0 * sigma * sigma)
        })
        .sum();
    total / samples.len() as f64
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub accepted: bool,
    /// Mean KL between the old and new policy (0 when rejected).
    pub kl: f64,
    pub surrogate_before: f64,
    pub surrogate_after: f64,
    pub grad_norm: f64,
    /// Backtracking steps taken before acceptance.
    pub backtracks: usize,
    pub zero_gradient: bool,
    pub non_finite: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Conjugate gradient for `A x = b` with `A` given as a product.
pub fn conjugate_gradient(apply: impl Fn(&[f64]) -> Vec<f64>, b: &[f64], iters: usize) -> Vec<f64> {
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let mut rr = dot(&r, &r);
    for _ in 0..iters {
        if rr < 1e-20 {
            break;
        }
        let ap = apply(&p);
        let alpha = rr / dot(&p, &ap);
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    x
}

/// One natural-gradient step with a KL-constrained backtracking line
/// search. A step is accepted only if the surrogate strictly improves and
/// the mean KL stays within the limit; otherwise the policy is left as is.
pub fn pg_update(policy: &mut Policy, samples: &PgSamples, config: &TrpoConfig) -> UpdateStats {
    let mut stats = UpdateStats::default();
    if samples.is_empty() {
        return stats;
    }
    let sigma = policy.sigma();
    let old_params = policy.net().params().to_vec();
    let grad = surrogate_gradient(policy.net(), sigma, samples);
    stats.grad_norm = dot(&grad, &grad).sqrt();
    if !stats.grad_norm.is_finite() {
        stats.non_finite = true;
        return stats;
    }
    stats.surrogate_before = surrogate(policy.net(), sigma, samples);
    stats.surrogate_after = stats.surrogate_before;
    if stats.grad_norm == 0.0 {
        stats.zero_gradient = true;
        return stats;
    }

    // Fisher of a fixed-variance Gaussian: mean J^T J / sigma^2.
    let net = policy.net();
    let mut jac_rows: Vec<Vec<f64>> = Vec::with_capacity(samples.len() * net.output_dim());
    let mut old_means = Vec::with_capacity(samples.len());
    for x in &samples.inputs {
        let (mean, rows) = net.output_jacobian(x);
        old_means.push(mean);
        jac_rows.extend(rows);
    }
    let scale = 1.0 / (samples.len() as f64 * sigma * sigma);
    let fvp = |v: &[f64]| {
        let mut out: Vec<f64> = v.iter().map(|x| config.cg_damping * x).collect();
        for row in &jac_rows {
            let jv = dot(row, v) * scale;
            for (o, r) in out.iter_mut().zip(row) {
                *o += jv * r;
            }
        }
        out
    };
    let dir = conjugate_gradient(fvp, &grad, config.cg_iters);
    let shs = 0.5 * dot(&dir, &fvp(&dir));
    if !(shs > 0.0) || !shs.is_finite() {
        stats.non_finite = !shs.is_finite();
        return stats;
    }
    let step_scale = (config.kl_limit / shs).sqrt();

    let mut frac = 1.0;
    let mut candidate = policy.net().clone();
    for k in 0..config.backtracks {
        for ((p, o), d) in candidate.params_mut().iter_mut().zip(&old_params).zip(&dir) {
            *p = o + frac * step_scale * d;
        }
        let kl = mean_kl(&old_means, &candidate, sigma, samples);
        let surr = surrogate(&candidate, sigma, samples);
        if kl.is_finite() && surr.is_finite() && kl <= config.kl_limit && surr > stats.surrogate_before {
            policy.net_mut().set_params(candidate.params());
            stats.accepted = true;
            stats.kl = kl;
            stats.surrogate_after = surr;
            stats.backtracks = k;
            return stats;
        }
        frac *= config.backtrack_coeff;
    }
    stats.backtracks = config.backtracks;
    stats
}
