//! Torque-limited pendulum swing-up with a sparse reward.
//!
//! `theta = 0` is upright. The hanging position `theta = pi` is a stable
//! equilibrium.
//!
//! | quantity | value |
//! |---|---|
//! | state | `[theta, omega]`, theta in [-pi, pi], omega in [-8, 8] |
//! | action | torque in [-2, 2] |
//! | g, m, l, dt | 10, 1, 1, 0.05 |
//! | goal | cos(theta) > 0.99 (non-terminating, reward cos(theta)) |
//! | horizon | 100 |

use std::f64::consts::PI;

use rand::{Rng, RngCore};

use super::{wrap_angle, Bounds, Dynamics, EnvSpec, StateVec, DISCOUNT};

const MAX_SPEED: f64 = 8.0;
const MAX_TORQUE: f64 = 2.0;
const G: f64 = 10.0;
const MASS: f64 = 1.0;
const LENGTH: f64 = 1.0;
const DT: f64 = 0.05;
pub const GOAL_COS: f64 = 0.99;

#[derive(Clone, Debug)]
pub struct Pendulum {
    spec: EnvSpec,
}

impl Pendulum {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "pendulum".into(),
                state_bounds: Bounds::new(vec![-PI, -MAX_SPEED], vec![PI, MAX_SPEED]),
                action_bounds: Bounds::new(vec![-MAX_TORQUE], vec![MAX_TORQUE]),
                horizon: 100,
                discount: DISCOUNT,
                goal_defined: true,
                terminal_goal: false,
            },
        }
    }
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new()
    }
}

impl Dynamics for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn propagate(&self, state: &[f64], action: &[f64]) -> StateVec {
        let (theta, omega) = (state[0], state[1]);
        let u = action[0];
        let accel = 3.0 * G / (2.0 * LENGTH) * theta.sin() + 3.0 / (MASS * LENGTH * LENGTH) * u;
        let omega = (omega + accel * DT).clamp(-MAX_SPEED, MAX_SPEED);
        vec![wrap_angle(theta + omega * DT), omega]
    }

    fn in_goal(&self, state: &[f64]) -> bool {
        state[0].cos() > GOAL_COS
    }

    fn reward(&self, next_state: &[f64]) -> f64 {
        if self.in_goal(next_state) {
            next_state[0].cos()
        } else {
            -1.0
        }
    }

    fn sample_initial(&self, rng: &mut dyn RngCore) -> StateVec {
        vec![rng.random_range(-PI..=PI), rng.random_range(-1.0..=1.0)]
    }

    fn sample_goal(&self, rng: &mut dyn RngCore) -> Option<StateVec> {
        let max_theta = GOAL_COS.acos();
        loop {
            let theta = rng.random_range(-max_theta..=max_theta);
            if theta.cos() > GOAL_COS {
                return Some(vec![theta, rng.random_range(-MAX_SPEED..=MAX_SPEED)]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvId;
    use crate::seed::rng_from_seed;

    #[test]
    fn hanging_equilibrium_is_fixed() {
        let mut env = EnvId::Pendulum.make();
        let t = env.step_from(&[PI, 0.0], &[0.0]).unwrap();
        assert!((t.next_state[0] - PI).abs() < 1e-12);
        assert!(t.next_state[1].abs() < 1e-12);
        assert_eq!(t.reward, -1.0);
        assert!(!t.done);
    }

    #[test]
    fn in_goal_steps_pay_cosine_without_terminating() {
        let mut env = EnvId::Pendulum.make();
        let t = env.step_from(&[0.0, 0.0], &[0.0]).unwrap();
        assert!(env.in_goal(&t.next_state));
        assert_eq!(t.reward, t.next_state[0].cos());
        assert!(!t.done);
    }

    #[test]
    fn start_distribution_range() {
        let mut env = EnvId::Pendulum.make();
        let mut rng = rng_from_seed(11);
        let bounds = env.spec().state_bounds.clone();
        for _ in 0..10_000 {
            let s = env.reset(&mut rng);
            assert!(s[0].abs() <= PI && s[1].abs() <= 1.0);
            assert!(bounds.contains(&s));
        }
    }

    #[test]
    fn goal_samples_satisfy_predicate() {
        let env = EnvId::Pendulum.make();
        let mut rng = rng_from_seed(12);
        for _ in 0..10_000 {
            let s = env.sample_goal_state(&mut rng).unwrap();
            assert!(s[0].cos() > 0.99);
            assert!(env.spec().state_bounds.contains(&s));
        }
    }

    #[test]
    fn velocity_is_clipped() {
        let mut env = EnvId::Pendulum.make();
        let t = env.step_from(&[PI / 2.0, 7.9], &[2.0]).unwrap();
        assert_eq!(t.next_state[1], MAX_SPEED);
    }
}
