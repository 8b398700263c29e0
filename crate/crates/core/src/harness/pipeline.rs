use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{summarize, CurveSummary, ExperimentConfig, LabeledCurve};
use crate::bc::{build_dataset, train_bc, BcConfig, Policy};
use crate::env::EnvId;
use crate::error::{invalid, Error, Result};
use crate::planner::{collect_demos, ExploreConfig};
use crate::rl::{default_batch_timesteps, refine, write_curve_csv, CurvePoint, RefineConfig, TrpoConfig};
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Explore, clone the demonstrations, then refine.
    R3lPg,
    /// Refine from a randomly initialized policy.
    VanillaPg,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::R3lPg => "r3l_pg",
            Method::VanillaPg => "vanilla_pg",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "r3l_pg" => Ok(Method::R3lPg),
            "vanilla_pg" => Ok(Method::VanillaPg),
            _ => Err(invalid(format!("unknown method '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub method: Method,
    pub seed: u64,
    /// Steps spent on exploration and demonstrations before refinement.
    pub offset: u64,
    pub curve: Vec<CurvePoint>,
    /// Set when exploration could not produce the demonstrations.
    pub error: Option<String>,
    pub bc_final_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub env: EnvId,
    pub runs: Vec<SeedResult>,
}

impl PipelineResult {
    /// Curves of the seeds that completed.
    pub fn curves(&self, method: Method) -> Vec<LabeledCurve> {
        self.runs
            .iter()
            .filter(|r| r.method == method && r.error.is_none())
            .map(|r| LabeledCurve {
                env: self.env.to_string(),
                seed: r.seed,
                points: r.curve.clone(),
            })
            .collect()
    }

    pub fn summary(&self, method: Method, checkpoints: Option<&[u64]>) -> Result<CurveSummary> {
        summarize(&self.curves(method), checkpoints)
    }
}

/// Per-seed stream indices.
const STREAM_DEMOS: u64 = 0;
const STREAM_INIT: u64 = 1;
const STREAM_BC: u64 = 2;
const STREAM_REFINE: u64 = 3;

fn run_seed(config: &ExperimentConfig, method: Method, seed: u64) -> Result<SeedResult> {
    let p = &config.pipeline;
    let mut env = p.env.make();
    let spec = env.spec().clone();
    // both methods start from the same random network for a given seed
    let mut policy = Policy::new(&spec, &mut rng_from_seed(derive_seed(seed, STREAM_INIT)));
    let mut bc_final_loss = None;
    if method == Method::R3lPg {
        let budget = p.explore_budget.unwrap_or_else(|| config.budget(p.env));
        let explore = ExploreConfig::new(budget, p.goal_bias, p.steering, derive_seed(seed, STREAM_DEMOS));
        let demos = match collect_demos(&mut env, &explore, p.demos) {
            Ok(c) => c.demos,
            Err(e @ Error::ExplorationFailure { .. }) => {
                return Ok(SeedResult {
                    method,
                    seed,
                    offset: env.interactions(),
                    curve: Vec::new(),
                    error: Some(e.to_string()),
                    bc_final_loss: None,
                })
            }
            Err(e) => return Err(e),
        };
        let data = build_dataset(&demos, &spec)?;
        let bc = BcConfig {
            seed: derive_seed(seed, STREAM_BC),
            ..p.bc.clone()
        };
        bc_final_loss = Some(train_bc(&mut policy, &data, &bc)?.final_loss());
    }
    let offset = env.interactions();
    let refine_cfg = RefineConfig {
        iterations: p.iterations,
        batch_timesteps: p.batch_timesteps.unwrap_or_else(|| default_batch_timesteps(&spec)),
        trpo: TrpoConfig::default(),
        timestep_offset: offset,
    };
    let mut env_refine = p.env.make();
    let curve = refine(
        &mut policy,
        &mut env_refine,
        &refine_cfg,
        &mut rng_from_seed(derive_seed(seed, STREAM_REFINE)),
    )?;
    Ok(SeedResult {
        method,
        seed,
        offset,
        curve,
        error: None,
        bc_final_loss,
    })
}

/// Runs every configured method for every run seed.
pub fn run_pipeline(config: &ExperimentConfig) -> Result<PipelineResult> {
    config.validate()?;
    let seeds = config.run_seeds();
    let jobs: Vec<(Method, u64)> = config
        .pipeline
        .methods
        .iter()
        .flat_map(|&m| seeds.iter().map(move |&s| (m, s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(m, s)| run_seed(config, m, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(PipelineResult {
        env: config.pipeline.env,
        runs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub method: Method,
    pub seed: u64,
    pub offset: u64,
    pub status: String,
    pub error: Option<String>,
    pub curve_file: Option<String>,
}

/// Everything needed to rerun an experiment exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub env: EnvId,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub runs: Vec<ManifestRun>,
}

/// Writes `<method>_seed<seed>.csv` per completed run, a summary JSON per
/// method, and `manifest.json`.
pub fn write_pipeline_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    result: &PipelineResult,
    version: &str,
) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut runs = Vec::new();
    for r in &result.runs {
        let curve_file = if r.error.is_none() {
            let name = format!("{}_seed{}.csv", r.method, r.seed);
            write_curve_csv(fs::File::create(dir.join(&name))?, r.seed, &r.curve)?;
            Some(name)
        } else {
            None
        };
        runs.push(ManifestRun {
            method: r.method,
            seed: r.seed,
            offset: r.offset,
            status: if r.error.is_none() { "ok" } else { "failed" }.into(),
            error: r.error.clone(),
            curve_file,
        });
    }
    for &m in &config.pipeline.methods {
        if let Ok(summary) = result.summary(m, None) {
            serde_json::to_writer_pretty(fs::File::create(dir.join(format!("summary_{m}.json")))?, &summary)?;
        }
    }
    let manifest = Manifest {
        version: version.to_string(),
        env: result.env,
        config: config.clone(),
        seeds: config.run_seeds(),
        runs,
    };
    serde_json::to_writer_pretty(fs::File::create(dir.join("manifest.json"))?, &manifest)?;
    Ok(manifest)
}
