//! Two-link underactuated acrobot with continuous torque on the elbow.
//!
//! Angles are measured from the downward vertical, so `[0, 0, 0, 0]` hangs
//! straight down. The tip height is `-cos(t0) - cos(t0 + t1)`.
//!
//! | quantity | value |
//! |---|---|
//! | state | `[t0, t1, w0, w1]`, w0 in [-4pi, 4pi], w1 in [-9pi, 9pi] |
//! | action | elbow torque in [-1, 1] |
//! | link lengths, masses, com, inertia | 1, 1, 0.5, 1 |
//! | g, dt | 9.8, 0.2 (one RK4 step) |
//! | goal | tip height > 1.9 (terminates) |
//! | horizon | 500 |

use std::f64::consts::PI;

use rand::{Rng, RngCore};

use super::{wrap_angle, Bounds, Dynamics, EnvSpec, StateVec, DISCOUNT};

const LINK_LENGTH_1: f64 = 1.0;
const LINK_MASS_1: f64 = 1.0;
const LINK_MASS_2: f64 = 1.0;
const LINK_COM_1: f64 = 0.5;
const LINK_COM_2: f64 = 0.5;
const LINK_MOI: f64 = 1.0;
const G: f64 = 9.8;
const DT: f64 = 0.2;
const MAX_VEL_1: f64 = 4.0 * PI;
const MAX_VEL_2: f64 = 9.0 * PI;
pub const GOAL_HEIGHT: f64 = 1.9;

#[derive(Clone, Debug)]
pub struct Acrobot {
    spec: EnvSpec,
}

impl Acrobot {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "acrobot".into(),
                state_bounds: Bounds::new(
                    vec![-PI, -PI, -MAX_VEL_1, -MAX_VEL_2],
                    vec![PI, PI, MAX_VEL_1, MAX_VEL_2],
                ),
                action_bounds: Bounds::new(vec![-1.0], vec![1.0]),
                horizon: 500,
                discount: DISCOUNT,
                goal_defined: true,
                terminal_goal: true,
            },
        }
    }

    pub fn tip_height(state: &[f64]) -> f64 {
        -state[0].cos() - (state[0] + state[1]).cos()
    }
}

impl Default for Acrobot {
    fn default() -> Self {
        Self::new()
    }
}

fn derivatives(s: [f64; 4], torque: f64) -> [f64; 4] {
    let (m1, m2, l1, lc1, lc2, i1, i2) = (
        LINK_MASS_1,
        LINK_MASS_2,
        LINK_LENGTH_1,
        LINK_COM_1,
        LINK_COM_2,
        LINK_MOI,
        LINK_MOI,
    );
    let [t1, t2, w1, w2] = s;
    let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * t2.cos()) + i1 + i2;
    let d2 = m2 * (lc2 * lc2 + l1 * lc2 * t2.cos()) + i2;
    let phi2 = m2 * lc2 * G * (t1 + t2 - PI / 2.0).cos();
    let phi1 = -m2 * l1 * lc2 * w2 * w2 * t2.sin() - 2.0 * m2 * l1 * lc2 * w2 * w1 * t2.sin()
        + (m1 * lc1 + m2 * l1) * G * (t1 - PI / 2.0).cos()
        + phi2;
    let dw2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * w1 * w1 * t2.sin() - phi2)
        / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
    let dw1 = -(d2 * dw2 + phi1) / d1;
    [w1, w2, dw1, dw2]
}

fn rk4(s: [f64; 4], torque: f64, dt: f64) -> [f64; 4] {
    let add = |a: [f64; 4], k: [f64; 4], h: f64| -> [f64; 4] {
        [a[0] + h * k[0], a[1] + h * k[1], a[2] + h * k[2], a[3] + h * k[3]]
    };
    let k1 = derivatives(s, torque);
    let k2 = derivatives(add(s, k1, dt / 2.0), torque);
    let k3 = derivatives(add(s, k2, dt / 2.0), torque);
    let k4 = derivatives(add(s, k3, dt), torque);
    let mut out = s;
    for i in 0..4 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

impl Dynamics for Acrobot {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn propagate(&self, state: &[f64], action: &[f64]) -> StateVec {
        let s = rk4([state[0], state[1], state[2], state[3]], action[0], DT);
        vec![
            wrap_angle(s[0]),
            wrap_angle(s[1]),
            s[2].clamp(-MAX_VEL_1, MAX_VEL_1),
            s[3].clamp(-MAX_VEL_2, MAX_VEL_2),
        ]
    }

    fn in_goal(&self, state: &[f64]) -> bool {
        Self::tip_height(state) > GOAL_HEIGHT
    }

    fn sample_initial(&self, rng: &mut dyn RngCore) -> StateVec {
        (0..4).map(|_| rng.random_range(-0.1..=0.1)).collect()
    }

    fn sample_goal(&self, rng: &mut dyn RngCore) -> Option<StateVec> {
        // Uniform over the goal region by rejection; about 1 in 60 angle
        // pairs land in it.
        loop {
            let t0 = rng.random_range(-PI..=PI);
            let t1 = rng.random_range(-PI..=PI);
            if Self::tip_height(&[t0, t1]) > GOAL_HEIGHT {
                return Some(vec![
                    t0,
                    t1,
                    rng.random_range(-MAX_VEL_1..=MAX_VEL_1),
                    rng.random_range(-MAX_VEL_2..=MAX_VEL_2),
                ]);
            }
        }
    }
}
