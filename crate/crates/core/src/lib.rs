//! Planner-driven exploration for sparse-reward reinforcement learning.
//!
//! The pipeline has three stages:
//!
//! 1. [`planner`] grows a kinodynamic rapidly-exploring random tree over an
//!    [`env::Env`], steered by a learned local policy ([`steering`]), until
//!    a goal state is reached.
//! 2. [`bc`] turns the resulting demonstrations into an initial policy by
//!    supervised regression.
//! 3. [`rl`] refines that policy with a KL-constrained natural policy
//!    gradient.
//!
//! [`analysis`] holds the random-walk and sampling-complexity formulas used
//! to reason about why stage 1 is needed, and [`harness`] runs the
//! ablation and pipeline experiments.

pub mod analysis;
pub mod bc;
pub mod env;
pub mod error;
pub mod harness;
pub mod planner;
pub mod rl;
pub mod seed;
pub mod steering;

pub use error::{Error, Result};
