//! Continuous-action mountain car with a sparse reward.
//!
//! | quantity | value |
//! |---|---|
//! | state | `[x, v]`, x in [-1.2, 0.6], v in [-0.07, 0.07] |
//! | action | force in [-1, 1] |
//! | power | 0.0015 |
//! | gravity term | 0.0025 cos(3x) |
//! | goal | x >= 0.45 (terminates) |
//! | horizon | 200 |

use rand::{Rng, RngCore};

use super::{Bounds, Dynamics, EnvSpec, StateVec, DISCOUNT};

const MIN_X: f64 = -1.2;
const MAX_X: f64 = 0.6;
const MAX_SPEED: f64 = 0.07;
const POWER: f64 = 0.0015;
const GRAVITY: f64 = 0.0025;
pub const GOAL_X: f64 = 0.45;

#[derive(Clone, Debug)]
pub struct MountainCar {
    spec: EnvSpec,
    start_center: f64,
    start_half_width: f64,
}

impl MountainCar {
    pub fn new() -> Self {
        Self::with_start_width(0.2)
    }

    /// Start positions are uniform in `[-0.5 - width/2, -0.5 + width/2]`.
    pub fn with_start_width(width: f64) -> Self {
        Self {
            spec: EnvSpec {
                name: "mountaincar".into(),
                state_bounds: Bounds::new(vec![MIN_X, -MAX_SPEED], vec![MAX_X, MAX_SPEED]),
                action_bounds: Bounds::new(vec![-1.0], vec![1.0]),
                horizon: 200,
                discount: DISCOUNT,
                goal_defined: true,
                terminal_goal: true,
            },
            start_center: -0.5,
            start_half_width: 0.5 * width,
        }
    }
}

impl Default for MountainCar {
    fn default() -> Self {
        Self::new()
    }
}

impl Dynamics for MountainCar {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn propagate(&self, state: &[f64], action: &[f64]) -> StateVec {
        let (x, v) = (state[0], state[1]);
        let mut v = (v + POWER * action[0] - GRAVITY * (3.0 * x).cos()).clamp(-MAX_SPEED, MAX_SPEED);
        let x = (x + v).clamp(MIN_X, MAX_X);
        // inelastic left wall
        if x == MIN_X && v < 0.0 {
            v = 0.0;
        }
        vec![x, v]
    }

    fn in_goal(&self, state: &[f64]) -> bool {
        state[0] >= GOAL_X
    }

    fn sample_initial(&self, rng: &mut dyn RngCore) -> StateVec {
        let x = if self.start_half_width > 0.0 {
            rng.random_range(
                self.start_center - self.start_half_width..self.start_center + self.start_half_width,
            )
        } else {
            self.start_center
        };
        vec![x, 0.0]
    }

    fn sample_goal(&self, rng: &mut dyn RngCore) -> Option<StateVec> {
        Some(vec![
            rng.random_range(GOAL_X..=MAX_X),
            rng.random_range(-MAX_SPEED..=MAX_SPEED),
        ])
    }
}
