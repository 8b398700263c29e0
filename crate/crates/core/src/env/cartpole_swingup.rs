//! Cart-pole swing-up on a bounded rail.
//!
//! `theta = 0` is upright; episodes start hanging (`theta = pi`). Hitting
//! an end of the rail stops the cart instead of ending the episode.
//!
//! | quantity | value |
//! |---|---|
//! | state | `[x, theta, x_dot, theta_dot]` |
//! | bounds | x in [-2.4, 2.4], x_dot in [-10, 10], theta_dot in [-10, 10] |
//! | action | force in [-10, 10] |
//! | cart mass, pole mass, pole half-length | 1.0, 0.1, 0.5 |
//! | g, dt | 9.8, 0.02 (explicit Euler) |
//! | goal | cos(theta) > 0.9 (non-terminating, reward cos(theta)) |
//! | horizon | 500 |

use std::f64::consts::PI;

use rand::{Rng, RngCore};

use super::{wrap_angle, Bounds, Dynamics, EnvSpec, StateVec, DISCOUNT};

const G: f64 = 9.8;
const MASS_CART: f64 = 1.0;
const MASS_POLE: f64 = 0.1;
const HALF_LENGTH: f64 = 0.5;
const MAX_FORCE: f64 = 10.0;
const DT: f64 = 0.02;
const RAIL: f64 = 2.4;
const MAX_CART_SPEED: f64 = 10.0;
const MAX_POLE_SPEED: f64 = 10.0;
pub const GOAL_COS: f64 = 0.9;
const START_NOISE: f64 = 0.01;

#[derive(Clone, Debug)]
pub struct CartpoleSwingup {
    spec: EnvSpec,
}

impl CartpoleSwingup {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "cartpole_swingup".into(),
                state_bounds: Bounds::new(
                    vec![-RAIL, -PI, -MAX_CART_SPEED, -MAX_POLE_SPEED],
                    vec![RAIL, PI, MAX_CART_SPEED, MAX_POLE_SPEED],
                ),
                action_bounds: Bounds::new(vec![-MAX_FORCE], vec![MAX_FORCE]),
                horizon: 500,
                discount: DISCOUNT,
                goal_defined: true,
                terminal_goal: false,
            },
        }
    }
}

impl Default for CartpoleSwingup {
    fn default() -> Self {
        Self::new()
    }
}

impl Dynamics for CartpoleSwingup {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn propagate(&self, state: &[f64], action: &[f64]) -> StateVec {
        let (x, theta, x_dot, theta_dot) = (state[0], state[1], state[2], state[3]);
        let force = action[0];
        let total_mass = MASS_CART + MASS_POLE;
        let pole_mass_length = MASS_POLE * HALF_LENGTH;
        let (sin, cos) = theta.sin_cos();

        let temp = (force + pole_mass_length * theta_dot * theta_dot * sin) / total_mass;
        let theta_acc = (G * sin - cos * temp)
            / (HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos * cos / total_mass));
        let x_acc = temp - pole_mass_length * theta_acc * cos / total_mass;

        let mut x = x + DT * x_dot;
        let mut x_dot = (x_dot + DT * x_acc).clamp(-MAX_CART_SPEED, MAX_CART_SPEED);
        let theta = wrap_angle(theta + DT * theta_dot);
        let theta_dot = (theta_dot + DT * theta_acc).clamp(-MAX_POLE_SPEED, MAX_POLE_SPEED);

        if !(-RAIL..=RAIL).contains(&x) {
            x = x.clamp(-RAIL, RAIL);
            x_dot = 0.0;
        }
        vec![x, theta, x_dot, theta_dot]
    }

    fn in_goal(&self, state: &[f64]) -> bool {
        state[1].cos() > GOAL_COS
    }

    fn reward(&self, next_state: &[f64]) -> f64 {
        if self.in_goal(next_state) {
            next_state[1].cos()
        } else {
            -1.0
        }
    }

    fn sample_initial(&self, rng: &mut dyn RngCore) -> StateVec {
        let mut noise = || rng.random_range(-START_NOISE..=START_NOISE);
        vec![noise(), wrap_angle(PI + noise()), noise(), noise()]
    }

    fn sample_goal(&self, rng: &mut dyn RngCore) -> Option<StateVec> {
        let max_theta = GOAL_COS.acos();
        loop {
            let theta = rng.random_range(-max_theta..=max_theta);
            if theta.cos() > GOAL_COS {
                return Some(vec![
                    rng.random_range(-RAIL..=RAIL),
                    theta,
                    rng.random_range(-MAX_CART_SPEED..=MAX_CART_SPEED),
                    rng.random_range(-MAX_POLE_SPEED..=MAX_POLE_SPEED),
                ]);
            }
        }
    }
}
