use rand::RngCore;

use crate::bc::{gaussian_log_prob, Policy};
use crate::env::{ActionVec, Env, StateVec};
use crate::error::{invalid, Result};

/// One episode of on-policy experience. `actions` are the sampled actions
/// before clipping; the environment clips them on execution.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub states: Vec<StateVec>,
    pub actions: Vec<ActionVec>,
    pub rewards: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub returns_to_go: Vec<f64>,
    pub success: bool,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn undiscounted_return(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutBatch {
    pub episodes: Vec<Episode>,
    pub discount: f64,
}

impl RolloutBatch {
    pub fn timesteps(&self) -> usize {
        self.episodes.iter().map(Episode::len).sum()
    }

    pub fn mean_return(&self) -> f64 {
        let n = self.episodes.len().max(1) as f64;
        self.episodes.iter().map(Episode::undiscounted_return).sum::<f64>() / n
    }

    pub fn success_rate(&self) -> f64 {
        let n = self.episodes.len().max(1) as f64;
        self.episodes.iter().filter(|e| e.success).count() as f64 / n
    }
}

/// `G_t = r_t + discount * G_{t+1}`, computed backwards.
pub fn returns_to_go(rewards: &[f64], discount: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut g = 0.0;
    for (o, r) in out.iter_mut().zip(rewards).rev() {
        g = r + discount * g;
        *o = g;
    }
    out
}

/// Runs whole episodes from fresh resets until at least `batch_timesteps`
/// steps have been collected. An episode ends at the horizon or on a
/// terminal transition; it counts as a success if any visited state lies
/// in the goal set.
pub fn collect_rollouts<R: RngCore>(
    env: &mut Env,
    policy: &Policy,
    batch_timesteps: usize,
    rng: &mut R,
) -> Result<RolloutBatch> {
    let spec = env.spec().clone();
    if batch_timesteps < spec.horizon {
        return Err(invalid(format!(
            "batch of {batch_timesteps} steps is shorter than the horizon {}",
            spec.horizon
        )));
    }
    let mut episodes = Vec::new();
    let mut total = 0;
    while total < batch_timesteps {
        let mut state = env.reset(rng);
        let mut ep = Episode {
            states: Vec::with_capacity(spec.horizon),
            actions: Vec::with_capacity(spec.horizon),
            rewards: Vec::with_capacity(spec.horizon),
            log_probs: Vec::with_capacity(spec.horizon),
            returns_to_go: Vec::new(),
            success: false,
        };
        for _ in 0..spec.horizon {
            let mean = policy.mean(&state);
            let action = policy.sample_raw(&state, rng);
            let tr = env.step(&action)?;
            // a zero-noise policy has no density; record 0 rather than NaN
            let lp = if policy.sigma() > 0.0 {
                gaussian_log_prob(&mean, &action, policy.sigma())
            } else {
                0.0
            };
            ep.log_probs.push(lp);
            ep.states.push(state);
            ep.actions.push(action);
            ep.rewards.push(tr.reward);
            ep.success |= spec.goal_defined && env.in_goal(&tr.next_state);
            state = tr.next_state;
            if tr.done {
                break;
            }
        }
        ep.returns_to_go = returns_to_go(&ep.rewards, spec.discount);
        total += ep.len();
        episodes.push(ep);
    }
    Ok(RolloutBatch {
        episodes,
        discount: spec.discount,
    })
}
