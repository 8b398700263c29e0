//! On-policy refinement with a KL-constrained natural policy gradient.

mod baseline;
mod rollout;
mod trpo;

use std::io::Write;

use rand::RngCore;
use serde::{Deserialize, Serialize};

pub use baseline::{least_squares, LinearBaseline, RIDGE};
pub use rollout::{collect_rollouts, returns_to_go, Episode, RolloutBatch};
pub use trpo::{
    conjugate_gradient, mean_kl, normalize_advantages, pg_update, surrogate, surrogate_gradient, PgSamples,
    TrpoConfig, UpdateStats,
};

use crate::bc::Policy;
use crate::env::{Env, EnvSpec};
use crate::error::Result;

/// Ten horizons per iteration.
pub fn default_batch_timesteps(spec: &EnvSpec) -> usize {
    10 * spec.horizon
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub iterations: usize,
    pub batch_timesteps: usize,
    #[serde(default)]
    pub trpo: TrpoConfig,
    /// Environment steps spent before refinement starts (exploration and
    /// demonstration collection); added to every reported step count.
    #[serde(default)]
    pub timestep_offset: u64,
}

/// One learning-curve point. `mean_return` and `success_rate` describe the
/// batch collected at this iteration, before its update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub cumulative_timesteps: u64,
    pub mean_return: f64,
    pub kl: f64,
    pub success_rate: f64,
}

/// collect, fit baseline, compute advantages, update; repeated.
pub fn refine<R: RngCore>(
    policy: &mut Policy,
    env: &mut Env,
    config: &RefineConfig,
    rng: &mut R,
) -> Result<Vec<CurvePoint>> {
    let spec = env.spec().clone();
    let mut baseline = LinearBaseline::new(spec.state_bounds.clone(), spec.horizon);
    let start = env.interactions();
    let mut curve = Vec::with_capacity(config.iterations);
    for iteration in 0..config.iterations {
        let batch = collect_rollouts(env, policy, config.batch_timesteps, rng)?;
        baseline.fit(&batch);
        let samples = PgSamples::from_batch(&batch, &baseline, policy);
        let stats = pg_update(policy, &samples, &config.trpo);
        curve.push(CurvePoint {
            iteration,
            cumulative_timesteps: config.timestep_offset + (env.interactions() - start),
            mean_return: batch.mean_return(),
            kl: stats.kl,
            success_rate: batch.success_rate(),
        });
    }
    Ok(curve)
}

/// CSV with columns `seed, iteration, cumulative_timesteps, mean_return,
/// kl, success_rate`.
pub fn write_curve_csv<W: Write>(out: W, seed: u64, curve: &[CurvePoint]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["seed", "iteration", "cumulative_timesteps", "mean_return", "kl", "success_rate"])?;
    for p in curve {
        w.write_record(&[
            seed.to_string(),
            p.iteration.to_string(),
            p.cumulative_timesteps.to_string(),
            p.mean_return.to_string(),
            p.kl.to_string(),
            p.success_rate.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct CurveRecord {
    seed: u64,
    iteration: usize,
    cumulative_timesteps: u64,
    mean_return: f64,
    kl: f64,
    success_rate: f64,
}

/// Reads rows written by [`write_curve_csv`], grouped by seed in file order.
pub fn read_curve_csv<R: std::io::Read>(input: R) -> Result<Vec<(u64, Vec<CurvePoint>)>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out: Vec<(u64, Vec<CurvePoint>)> = Vec::new();
    for row in rdr.deserialize() {
        let r: CurveRecord = row?;
        let point = CurvePoint {
            iteration: r.iteration,
            cumulative_timesteps: r.cumulative_timesteps,
            mean_return: r.mean_return,
            kl: r.kl,
            success_rate: r.success_rate,
        };
        match out.last_mut() {
            Some((seed, pts)) if *seed == r.seed => pts.push(point),
            _ => out.push((r.seed, vec![point])),
        }
    }
    Ok(out)
}
