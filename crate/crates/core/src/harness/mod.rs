//! Experiment orchestration: steering ablations, failure-tail sweeps, the
//! explore-clone-refine pipeline against refinement from scratch, and
//! curve summaries.
//!
//! Every run draws its generator from a master seed and a counter, and
//! parallel results are merged by key, so outputs do not depend on thread
//! scheduling.

mod ablation;
mod pipeline;
mod summary;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

pub use ablation::{
    failure_tail_sweep, format_table, run_ablation, write_runs_csv, write_summary_csv, AblationTable, CellSummary,
    TailSweep,
};
pub use pipeline::{run_pipeline, write_pipeline_outputs, Manifest, ManifestRun, Method, PipelineResult, SeedResult};
pub use summary::{percentile, step_value, summarize, CurveSummary, LabeledCurve};

use crate::bc::{BcConfig, DEFAULT_DEMOS};
use crate::env::EnvId;
use crate::error::{invalid, Result};
use crate::planner::DEFAULT_GOAL_BIAS;
use crate::seed::derive_seed;
use crate::steering::SteeringMode;

/// Library version; binaries may substitute a `git describe` string.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default exploration step cap per environment.
pub fn default_budget(env: EnvId) -> usize {
    match env {
        EnvId::MountainCar | EnvId::Pendulum => 50_000,
        EnvId::Acrobot => 200_000,
        EnvId::CartpoleSwingup => 300_000,
    }
}

/// `n` run seeds derived from `master`.
pub fn derive_seeds(master: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| derive_seed(master, i)).collect()
}

/// One ablation column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub steering: SteeringMode,
    pub goal_bias: f64,
}

impl Variant {
    /// The four cells of the steering x goal-bias grid.
    pub fn grid() -> Vec<Variant> {
        let mut out = Vec::new();
        for goal_bias in [DEFAULT_GOAL_BIAS, 0.0] {
            for steering in [SteeringMode::Learned, SteeringMode::Random] {
                out.push(Variant { steering, goal_bias });
            }
        }
        out
    }

    pub fn label(&self) -> String {
        format!("{} p_g={}", self.steering, self.goal_bias)
    }
}

/// Settings for the explore, clone and refine pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineSettings {
    pub env: EnvId,
    pub methods: Vec<Method>,
    pub demos: usize,
    pub explore_budget: Option<usize>,
    pub goal_bias: f64,
    pub steering: SteeringMode,
    pub bc: BcConfig,
    pub iterations: usize,
    /// Defaults to ten horizons.
    pub batch_timesteps: Option<usize>,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            env: EnvId::MountainCar,
            methods: vec![Method::R3lPg, Method::VanillaPg],
            demos: DEFAULT_DEMOS,
            explore_budget: None,
            goal_bias: DEFAULT_GOAL_BIAS,
            steering: SteeringMode::Learned,
            bc: BcConfig::default(),
            iterations: 100,
            batch_timesteps: None,
        }
    }
}

/// A complete experiment description; one JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub envs: Vec<EnvId>,
    pub variants: Vec<Variant>,
    pub n_runs: usize,
    pub master_seed: u64,
    /// Explicit run seeds; derived from `master_seed` when absent.
    pub seeds: Option<Vec<u64>>,
    /// Per-environment step caps overriding [`default_budget`].
    pub budgets: BTreeMap<EnvId, usize>,
    pub pipeline: PipelineSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            envs: EnvId::ALL.to_vec(),
            variants: Variant::grid(),
            n_runs: 20,
            master_seed: 0,
            seeds: None,
            budgets: BTreeMap::new(),
            pipeline: PipelineSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(invalid("n_runs must be at least 1"));
        }
        if let Some(seeds) = &self.seeds {
            if seeds.len() != self.n_runs {
                return Err(invalid(format!("{} seeds given for {} runs", seeds.len(), self.n_runs)));
            }
            if seeds.iter().collect::<HashSet<_>>().len() != seeds.len() {
                return Err(invalid("seeds must be distinct"));
            }
        }
        for v in &self.variants {
            if !(0.0..=1.0).contains(&v.goal_bias) {
                return Err(invalid(format!("goal bias {} outside [0, 1]", v.goal_bias)));
            }
        }
        if self.budgets.values().any(|&b| b == 0) {
            return Err(invalid("budgets must be positive"));
        }
        let p = &self.pipeline;
        if p.demos == 0 {
            return Err(invalid("pipeline needs at least one demonstration"));
        }
        if p.methods.is_empty() {
            return Err(invalid("pipeline needs at least one method"));
        }
        Ok(())
    }

    pub fn run_seeds(&self) -> Vec<u64> {
        self.seeds
            .clone()
            .unwrap_or_else(|| derive_seeds(self.master_seed, self.n_runs))
    }

    pub fn budget(&self, env: EnvId) -> usize {
        self.budgets.get(&env).copied().unwrap_or_else(|| default_budget(env))
    }
}
