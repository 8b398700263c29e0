use serde::{Deserialize, Serialize};

use crate::env::{ActionVec, Env, StateVec, TransitionRecord};
use crate::error::{invalid, Result};

/// A valid state-action sequence `[s_0, a_0, s_1, ..., s_T]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<StateVec>,
    pub actions: Vec<ActionVec>,
    pub rewards: Vec<f64>,
    pub successful: bool,
}

impl Trajectory {
    /// Number of transitions.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn first_state(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has a root state")
    }

    pub fn discounted_return(&self, discount: f64) -> f64 {
        let mut g = 1.0;
        let mut total = 0.0;
        for r in &self.rewards {
            total += g * r;
            g *= discount;
        }
        total
    }

    pub fn undiscounted_return(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// Checks the shape invariants and replays every transition through
    /// `env`, requiring bit-identical states and rewards.
    pub fn validate(&self, env: &mut Env) -> Result<()> {
        if self.states.len() != self.actions.len() + 1 || self.rewards.len() != self.actions.len() {
            return Err(invalid(format!(
                "malformed trajectory: {} states, {} actions, {} rewards",
                self.states.len(),
                self.actions.len(),
                self.rewards.len()
            )));
        }
        if self.successful && env.spec().goal_defined && !env.in_goal(self.last_state()) {
            return Err(invalid("successful trajectory does not end in the goal set"));
        }
        env.set_state(&self.states[0])?;
        for (t, action) in self.actions.iter().enumerate() {
            let tr = env.step(action)?;
            if tr.next_state != self.states[t + 1] || tr.reward != self.rewards[t] {
                return Err(invalid(format!("replay diverges at step {t}")));
            }
        }
        Ok(())
    }

    pub fn to_records(&self, env: &Env) -> Vec<TransitionRecord> {
        let terminal = env.spec().terminal_goal;
        (0..self.len())
            .map(|t| TransitionRecord {
                state: self.states[t].clone(),
                action: self.actions[t].clone(),
                reward: self.rewards[t],
                done: terminal && env.in_goal(&self.states[t + 1]),
                next_state: self.states[t + 1].clone(),
            })
            .collect()
    }

    /// Rebuilds a trajectory from consecutive records. An empty slice is
    /// rejected since the start state would be lost.
    pub fn from_records(records: &[TransitionRecord], env: &Env) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| invalid("cannot rebuild a trajectory from zero records"))?;
        let mut states = vec![first.state.clone()];
        for (t, r) in records.iter().enumerate() {
            if r.state != *states.last().unwrap() {
                return Err(invalid(format!("record {t} does not continue the trajectory")));
            }
            states.push(r.next_state.clone());
        }
        let last = states.last().unwrap();
        Ok(Self {
            successful: env.spec().goal_defined && env.in_goal(last),
            actions: records.iter().map(|r| r.action.clone()).collect(),
            rewards: records.iter().map(|r| r.reward).collect(),
            states,
        })
    }
}
