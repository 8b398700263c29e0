//! Deterministic, state-settable sparse-reward control environments.
//!
//! Each environment is a [`Dynamics`] model wrapped in an [`Env`], which
//! owns the current state and counts every call to [`Env::step`]. Rewards
//! are `-1` per step, except that Pendulum and Cartpole Swingup pay
//! `cos(theta)` for steps that end in the goal set.

mod acrobot;
mod cartpole_swingup;
mod mountain_car;
mod pendulum;

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use acrobot::Acrobot;
pub use cartpole_swingup::CartpoleSwingup;
pub use mountain_car::MountainCar;
pub use pendulum::Pendulum;

pub type StateVec = Vec<f64>;
pub type ActionVec = Vec<f64>;

pub const DISCOUNT: f64 = 0.99;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EnvId {
    #[serde(rename = "mountaincar")]
    MountainCar,
    #[serde(rename = "pendulum")]
    Pendulum,
    #[serde(rename = "acrobot")]
    Acrobot,
    #[serde(rename = "cartpole_swingup")]
    CartpoleSwingup,
}

impl EnvId {
    pub const ALL: [EnvId; 4] = [
        EnvId::MountainCar,
        EnvId::Pendulum,
        EnvId::Acrobot,
        EnvId::CartpoleSwingup,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvId::MountainCar => "mountaincar",
            EnvId::Pendulum => "pendulum",
            EnvId::Acrobot => "acrobot",
            EnvId::CartpoleSwingup => "cartpole_swingup",
        }
    }

    pub fn make(self) -> Env {
        let dynamics: Box<dyn Dynamics> = match self {
            EnvId::MountainCar => Box::new(MountainCar::new()),
            EnvId::Pendulum => Box::new(Pendulum::new()),
            EnvId::Acrobot => Box::new(Acrobot::new()),
            EnvId::CartpoleSwingup => Box::new(CartpoleSwingup::new()),
        };
        Env::new(dynamics)
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown environment id '{s}'")))
    }
}

/// Axis-aligned box `[low_i, high_i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl Bounds {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Self {
        assert_eq!(low.len(), high.len(), "bounds dimension mismatch");
        assert!(
            low.iter().zip(&high).all(|(l, h)| l <= h),
            "low must not exceed high"
        );
        Self { low, high }
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.low.iter().zip(&self.high))
                .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    pub fn clip(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(v, (l, h))| v.clamp(*l, *h))
            .collect()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.low
            .iter()
            .zip(&self.high)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    /// Affine map of the box onto `[-1, 1]` per dimension.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(v, (l, h))| {
                if h > l {
                    2.0 * (v - l) / (h - l) - 1.0
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(u, (l, h))| l + 0.5 * (u + 1.0) * (h - l))
            .collect()
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.low
            .iter()
            .zip(&self.high)
            .map(|(l, h)| if h > l { rng.random_range(*l..*h) } else { *l })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub state_bounds: Bounds,
    pub action_bounds: Bounds,
    pub horizon: usize,
    pub discount: f64,
    pub goal_defined: bool,
    /// Whether entering the goal set ends an episode.
    pub terminal_goal: bool,
}

impl EnvSpec {
    pub fn state_dim(&self) -> usize {
        self.state_bounds.dim()
    }

    pub fn action_dim(&self) -> usize {
        self.action_bounds.dim()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: StateVec,
    /// The action actually applied, i.e. after clipping.
    pub action: ActionVec,
    pub next_state: StateVec,
    pub reward: f64,
    pub done: bool,
}

/// Environment model. Implementors must be pure functions of their inputs;
/// `Env` layers state, clipping, counting and validation on top.
pub trait Dynamics: Send + Sync {
    fn spec(&self) -> &EnvSpec;

    /// Next state from `state` under an action already clipped to bounds.
    /// Must return a state inside the state bounds.
    fn propagate(&self, state: &[f64], action: &[f64]) -> StateVec;

    fn in_goal(&self, state: &[f64]) -> bool;

    /// Reward for a step landing in `next_state`.
    fn reward(&self, _next_state: &[f64]) -> f64 {
        -1.0
    }

    fn sample_initial(&self, rng: &mut dyn RngCore) -> StateVec;

    /// `None` when the environment has no goal set.
    fn sample_goal(&self, rng: &mut dyn RngCore) -> Option<StateVec>;
}

/// A stateful environment instance.
pub struct Env {
    dynamics: Box<dyn Dynamics>,
    state: StateVec,
    interactions: u64,
}

impl Env {
    pub fn new(dynamics: Box<dyn Dynamics>) -> Self {
        let state = dynamics.spec().state_bounds.midpoint();
        Self {
            dynamics,
            state,
            interactions: 0,
        }
    }

    pub fn spec(&self) -> &EnvSpec {
        self.dynamics.spec()
    }

    pub fn name(&self) -> &str {
        &self.spec().name
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    /// Number of `step` calls made on this instance so far.
    pub fn interactions(&self) -> u64 {
        self.interactions
    }

    pub fn reset<R: RngCore>(&mut self, rng: &mut R) -> StateVec {
        self.state = self.dynamics.sample_initial(rng);
        self.state.clone()
    }

    pub fn set_state(&mut self, state: &[f64]) -> Result<()> {
        self.check_state(state)?;
        self.state.clear();
        self.state.extend_from_slice(state);
        Ok(())
    }

    pub fn step(&mut self, action: &[f64]) -> Result<Transition> {
        let spec = self.dynamics.spec();
        if action.len() != spec.action_dim() {
            return Err(invalid(format!(
                "action has {} entries, expected {}",
                action.len(),
                spec.action_dim()
            )));
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(invalid("non-finite action"));
        }
        let action = spec.action_bounds.clip(action);
        let next_state = self.dynamics.propagate(&self.state, &action);
        debug_assert!(spec.state_bounds.contains(&next_state));
        let reward = self.dynamics.reward(&next_state);
        let done = spec.terminal_goal && self.dynamics.in_goal(&next_state);
        self.interactions += 1;
        let state = std::mem::replace(&mut self.state, next_state.clone());
        Ok(Transition {
            state,
            action,
            next_state,
            reward,
            done,
        })
    }

    /// `set_state(state)` followed by `step(action)`.
    pub fn step_from(&mut self, state: &[f64], action: &[f64]) -> Result<Transition> {
        self.set_state(state)?;
        self.step(action)
    }

    pub fn sample_state_uniform<R: RngCore>(&self, rng: &mut R) -> StateVec {
        self.spec().state_bounds.sample_uniform(rng)
    }

    pub fn sample_goal_state<R: RngCore>(&self, rng: &mut R) -> Result<StateVec> {
        self.dynamics.sample_goal(rng).ok_or_else(|| {
            Error::Unsupported(format!("{} has no goal set", self.spec().name))
        })
    }

    pub fn in_goal(&self, state: &[f64]) -> bool {
        self.dynamics.in_goal(state)
    }

    pub fn normalize(&self, state: &[f64]) -> StateVec {
        self.spec().state_bounds.normalize(state)
    }

    pub fn denormalize(&self, z: &[f64]) -> StateVec {
        self.spec().state_bounds.denormalize(z)
    }

    fn check_state(&self, state: &[f64]) -> Result<()> {
        let bounds = &self.spec().state_bounds;
        if state.len() != bounds.dim() {
            return Err(invalid(format!(
                "state has {} entries, expected {}",
                state.len(),
                bounds.dim()
            )));
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite state"));
        }
        if !bounds.contains(state) {
            return Err(invalid(format!("state {state:?} outside bounds")));
        }
        Ok(())
    }
}

impl fmt::Debug for Env {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Env")
            .field("name", &self.spec().name)
            .field("state", &self.state)
            .field("interactions", &self.interactions)
            .finish()
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub(crate) fn wrap_angle(mut x: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    while x > PI {
        x -= TAU;
    }
    while x <= -PI {
        x += TAU;
    }
    x
}

/// One line of a trajectory file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub state: StateVec,
    pub action: ActionVec,
    pub reward: f64,
    pub done: bool,
    pub next_state: StateVec,
}

impl From<&Transition> for TransitionRecord {
    fn from(t: &Transition) -> Self {
        Self {
            state: t.state.clone(),
            action: t.action.clone(),
            reward: t.reward,
            done: t.done,
            next_state: t.next_state.clone(),
        }
    }
}

pub fn write_transitions_jsonl<W: Write>(mut out: W, records: &[TransitionRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_transitions_jsonl<R: BufRead>(input: R) -> Result<Vec<TransitionRecord>> {
    let mut records = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(records)
}
