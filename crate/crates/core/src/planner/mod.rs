//! Kinodynamic RRT exploration in state space.
//!
//! Each iteration samples a target state (uniformly, or from the goal set
//! with probability `goal_bias`), picks the nearest expandable tree node in
//! normalized coordinates, asks the steering model for an action, executes
//! that action from the node's state, feeds the realized transition back to
//! the steering model and appends the result to the tree.

mod demos;
mod kdtree;
mod trajectory;
mod tree;

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Env, StateVec};
use crate::error::{invalid, Error, Result};
use crate::seed::{rng_from_seed, SimRng};
use crate::steering::{Steering, SteeringInput, SteeringMode};

pub use demos::{collect_demos, DemoCollection, DemoHeader, DemoSet};
pub use kdtree::KdTree;
pub use trajectory::Trajectory;
pub use tree::{ExplorationTree, TreeNode};

pub const DEFAULT_GOAL_BIAS: f64 = 0.05;

/// When an exploration run stops.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Stop at the first node inside the goal set.
    #[default]
    FirstGoal,
    /// Spend the whole budget, then return the best goal trajectory.
    FullBudget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExploreConfig {
    /// Maximum number of tree expansions (one environment step each).
    pub budget: usize,
    pub goal_bias: f64,
    pub steering: SteeringMode,
    pub seed: u64,
    #[serde(default)]
    pub stop: StopRule,
}

impl ExploreConfig {
    pub fn new(budget: usize, goal_bias: f64, steering: SteeringMode, seed: u64) -> Self {
        Self {
            budget,
            goal_bias,
            steering,
            seed,
            stop: StopRule::FirstGoal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(invalid("exploration budget must be positive"));
        }
        if !(0.0..=1.0).contains(&self.goal_bias) {
            return Err(invalid(format!("goal bias {} outside [0, 1]", self.goal_bias)));
        }
        Ok(())
    }
}

/// Outcome of one exploration run; one CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub env: String,
    pub steering_mode: SteeringMode,
    pub p_g: f64,
    pub seed: u64,
    pub traj_len: usize,
    /// Environment steps spent by the run.
    pub timesteps: u64,
    pub success: bool,
    pub wall_time: f64,
}

#[derive(Clone, Debug)]
pub struct Exploration {
    pub tree: ExplorationTree,
    pub trajectory: Trajectory,
    pub leaf: usize,
    pub stats: RunStats,
}

/// Grows a tree from `root` and returns the trajectory to the selected
/// leaf.
///
/// The leaf is the first goal node under [`StopRule::FirstGoal`]. Otherwise,
/// or if the budget runs out first, it is the goal node with the largest
/// discounted return, falling back to the best node overall when no goal
/// node exists.
pub fn explore(
    env: &mut Env,
    root: StateVec,
    steering: &mut dyn Steering,
    config: &ExploreConfig,
    rng: &mut SimRng,
) -> Result<Exploration> {
    config.validate()?;
    let started = Instant::now();
    let steps_before = env.interactions();
    let spec = env.spec().clone();
    let goal_defined = spec.goal_defined;

    env.set_state(&root)?;
    let root_goal = goal_defined && env.in_goal(&root);
    let normalized_root = env.normalize(&root);
    let mut tree = ExplorationTree::new(root, normalized_root, root_goal, spec.horizon, spec.discount);

    let mut first_goal = root_goal.then_some(0);
    if first_goal.is_none() || config.stop == StopRule::FullBudget {
        for _ in 0..config.budget {
            let target = if goal_defined && config.goal_bias > 0.0 && rng.random::<f64>() < config.goal_bias {
                env.sample_goal_state(rng)?
            } else {
                env.sample_state_uniform(rng)
            };
            let target = env.normalize(&target);
            let near = match tree.nearest(&target) {
                Ok(id) => id,
                Err(Error::NoExpandableNode) => break,
                Err(e) => return Err(e),
            };
            let near_normalized = tree.normalized_state(near).to_vec();
            let action = steering.sample(&SteeringInput::between(&near_normalized, &target), rng);
            let tr = env.step_from(&tree.node(near).state, &action)?;
            let new_normalized = env.normalize(&tr.next_state);
            steering.update(&SteeringInput::between(&near_normalized, &new_normalized), &tr.action);

            let in_goal = goal_defined && env.in_goal(&tr.next_state);
            let id = tree.add_child(near, tr.action, tr.next_state, new_normalized, tr.reward, in_goal, tr.done);
            if in_goal {
                first_goal.get_or_insert(id);
                if config.stop == StopRule::FirstGoal {
                    break;
                }
            }
        }
    }

    let leaf = match (config.stop, first_goal) {
        (StopRule::FirstGoal, Some(id)) => id,
        _ => {
            let goals: Vec<usize> = (0..tree.len()).filter(|&i| tree.node(i).in_goal).collect();
            if goals.is_empty() {
                tree.argmax_return(0..tree.len())
            } else {
                tree.argmax_return(goals)
            }
            .expect("tree has a root")
        }
    };
    let trajectory = tree.extract_trajectory(leaf);
    let stats = RunStats {
        env: spec.name.clone(),
        steering_mode: steering.mode(),
        p_g: config.goal_bias,
        seed: config.seed,
        traj_len: trajectory.len(),
        timesteps: env.interactions() - steps_before,
        success: trajectory.successful,
        wall_time: started.elapsed().as_secs_f64(),
    };
    Ok(Exploration {
        tree,
        trajectory,
        leaf,
        stats,
    })
}

/// One seeded run: reset `env` for the root, build a fresh steering model
/// and explore.
pub fn run_exploration(env: &mut Env, config: &ExploreConfig) -> Result<Exploration> {
    let mut rng = rng_from_seed(config.seed);
    let root = env.reset(&mut rng);
    let mut steering = config.steering.build(env.spec(), &mut rng);
    explore(env, root, steering.as_mut(), config, &mut rng)
}
