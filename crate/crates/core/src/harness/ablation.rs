use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, Variant};
use crate::analysis::{failures_by_budget, fit_failure_tail, BudgetOutcome, TailFit};
use crate::env::EnvId;
use crate::error::{invalid, Error, Result};
use crate::planner::{run_exploration, ExploreConfig, RunStats};
use crate::steering::SteeringMode;

/// Runs of one (environment, steering, goal bias) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub env: EnvId,
    pub steering: SteeringMode,
    pub goal_bias: f64,
    pub runs: Vec<RunStats>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl CellSummary {
    pub fn successes(&self) -> usize {
        self.runs.iter().filter(|r| r.success).count()
    }

    /// Mean and sample std of `|tau|` over successful runs.
    pub fn traj_len(&self) -> (f64, f64) {
        let xs: Vec<f64> = self.runs.iter().filter(|r| r.success).map(|r| r.traj_len as f64).collect();
        mean_std(&xs)
    }

    /// Mean and sample std of exploration timesteps over all runs; failed
    /// runs contribute their full budget.
    pub fn timesteps(&self) -> (f64, f64) {
        let xs: Vec<f64> = self.runs.iter().map(|r| r.timesteps as f64).collect();
        mean_std(&xs)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub variants: Vec<Variant>,
    pub cells: Vec<CellSummary>,
}

impl AblationTable {
    pub fn cell(&self, env: EnvId, steering: SteeringMode, goal_bias: f64) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.env == env && c.steering == steering && c.goal_bias == goal_bias)
    }
}

/// `n_runs` explorations per cell. Cells share run seeds, so the k-th run
/// of every cell starts from the same reset.
pub fn run_ablation(config: &ExperimentConfig) -> Result<AblationTable> {
    config.validate()?;
    if config.envs.is_empty() || config.variants.is_empty() {
        return Err(invalid("ablation needs at least one environment and one variant"));
    }
    let seeds = config.run_seeds();
    let cells: Vec<(EnvId, Variant)> = config
        .envs
        .iter()
        .flat_map(|&e| config.variants.iter().map(move |&v| (e, v)))
        .collect();
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results: Vec<Result<RunStats>> = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let (env_id, v) = cells[c];
            let mut env = env_id.make();
            let explore = ExploreConfig::new(config.budget(env_id), v.goal_bias, v.steering, seed);
            run_exploration(&mut env, &explore).map(|e| e.stats)
        })
        .collect();
    let mut grouped: Vec<Vec<RunStats>> = vec![Vec::with_capacity(seeds.len()); cells.len()];
    for (&(c, _), r) in jobs.iter().zip(results) {
        grouped[c].push(r?);
    }
    Ok(AblationTable {
        variants: config.variants.clone(),
        cells: cells
            .into_iter()
            .zip(grouped)
            .map(|((env, v), runs)| CellSummary {
                env,
                steering: v.steering,
                goal_bias: v.goal_bias,
                runs,
            })
            .collect(),
    })
}

/// One row per run.
pub fn write_runs_csv<W: Write>(out: W, table: &AblationTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for cell in &table.cells {
        for run in &cell.runs {
            w.serialize(run)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per cell with means and standard deviations.
pub fn write_summary_csv<W: Write>(out: W, table: &AblationTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "env",
        "steering_mode",
        "p_g",
        "runs",
        "successes",
        "traj_len_mean",
        "traj_len_std",
        "timesteps_mean",
        "timesteps_std",
    ])?;
    for c in &table.cells {
        let (lm, ls) = c.traj_len();
        let (tm, ts) = c.timesteps();
        w.write_record(&[
            c.env.to_string(),
            c.steering.to_string(),
            c.goal_bias.to_string(),
            c.runs.len().to_string(),
            c.successes().to_string(),
            format!("{lm:.2}"),
            format!("{ls:.2}"),
            format!("{tm:.2}"),
            format!("{ts:.2}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Fixed-width table: one block per environment with a `|tau|` row and a
/// timesteps row, one column per variant.
pub fn format_table(table: &AblationTable) -> String {
    let width = 22;
    let mut s = String::new();
    let _ = write!(s, "{:<18}{:<11}", "env", "");
    for v in &table.variants {
        let _ = write!(s, "{:>width$}", v.label());
    }
    s.push('\n');
    let mut envs: Vec<EnvId> = table.cells.iter().map(|c| c.env).collect();
    envs.dedup();
    for env in envs {
        for (row, pick) in [("|tau|", 0), ("timesteps", 1)] {
            let name = if pick == 0 { env.as_str() } else { "" };
            let _ = write!(s, "{name:<18}{row:<11}");
            for v in &table.variants {
                let cell = table.cell(env, v.steering, v.goal_bias);
                let text = match cell {
                    Some(c) => {
                        let (m, sd) = if pick == 0 { c.traj_len() } else { c.timesteps() };
                        let fails = c.runs.len() - c.successes();
                        let mark = if fails > 0 { format!(" ({fails}F)") } else { String::new() };
                        format!("{m:.2} ± {sd:.2}{mark}")
                    }
                    None => "-".into(),
                };
                let _ = write!(s, "{text:>width$}");
            }
            s.push('\n');
        }
    }
    s
}

/// Exploration failure rates across budgets for one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailSweep {
    pub env: EnvId,
    pub steering: SteeringMode,
    pub goal_bias: f64,
    pub seeds: Vec<u64>,
    /// Steps each run needed to reach the goal under the largest budget.
    pub steps_to_goal: Vec<Option<u64>>,
    pub outcomes: Vec<BudgetOutcome>,
    /// `None` when fewer than two budgets saw a failure.
    pub fit: Option<TailFit>,
}

/// Runs each seed once with the largest budget. A run's samples do not
/// depend on the budget, so a run with budget `k` fails exactly when the
/// long run needed more than `k` steps.
pub fn failure_tail_sweep(env_id: EnvId, variant: Variant, budgets: &[u64], seeds: &[u64]) -> Result<TailSweep> {
    let max = *budgets.iter().max().ok_or_else(|| invalid("no budgets given"))?;
    if seeds.is_empty() || budgets.contains(&0) {
        return Err(invalid("need seeds and positive budgets"));
    }
    let steps_to_goal: Vec<Option<u64>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut env = env_id.make();
            let cfg = ExploreConfig::new(max as usize, variant.goal_bias, variant.steering, seed);
            run_exploration(&mut env, &cfg).map(|e| e.stats.success.then_some(e.stats.timesteps))
        })
        .collect::<Result<_>>()?;
    let outcomes = failures_by_budget(&steps_to_goal, budgets);
    let fit = match fit_failure_tail(&outcomes) {
        Ok(f) => Some(f),
        Err(Error::InsufficientData(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(TailSweep {
        env: env_id,
        steering: variant.steering,
        goal_bias: variant.goal_bias,
        seeds: seeds.to_vec(),
        steps_to_goal,
        outcomes,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            envs: vec![EnvId::MountainCar],
            n_runs: 2,
            ..ExperimentConfig::default()
        };
        cfg.budgets.insert(EnvId::MountainCar, 3000);
        cfg
    }

    #[test]
    fn ablation_table_shape_and_reproducibility() {
        let cfg = small_config();
        let a = run_ablation(&cfg).unwrap();
        assert_eq!(a.cells.len(), 4);
        assert!(a.cells.iter().all(|c| c.runs.len() == 2));
        // same seeds in every cell
        let seeds: Vec<u64> = a.cells[0].runs.iter().map(|r| r.seed).collect();
        assert!(a.cells.iter().all(|c| c.runs.iter().map(|r| r.seed).collect::<Vec<_>>() == seeds));
        for c in &a.cells {
            for r in &c.runs {
                assert!(r.timesteps >= r.traj_len as u64);
            }
        }
        let b = run_ablation(&cfg).unwrap();
        assert_eq!(format_table(&a), format_table(&b));
        let text = format_table(&a);
        assert!(text.contains("mountaincar") && text.contains("timesteps"));
        let mut summary = Vec::new();
        write_summary_csv(&mut summary, &a).unwrap();
        assert_eq!(String::from_utf8(summary).unwrap().lines().count(), 5);
        let mut runs = Vec::new();
        write_runs_csv(&mut runs, &a).unwrap();
        let runs = String::from_utf8(runs).unwrap();
        assert!(runs.starts_with("env,steering_mode,p_g,seed,traj_len,timesteps,success,wall_time"));
        assert_eq!(runs.lines().count(), 9);
    }

    #[test]
    fn statistics_of_a_cell() {
        let run = |len: usize, steps: u64, success: bool| RunStats {
            env: "mountaincar".into(),
            steering_mode: SteeringMode::Learned,
            p_g: 0.05,
            seed: 0,
            traj_len: len,
            timesteps: steps,
            success,
            wall_time: 0.0,
        };
        let cell = CellSummary {
            env: EnvId::MountainCar,
            steering: SteeringMode::Learned,
            goal_bias: 0.05,
            runs: vec![run(10, 100, true), run(20, 300, true), run(0, 1000, false)],
        };
        assert_eq!(cell.successes(), 2);
        let (m, s) = cell.traj_len();
        assert_eq!(m, 15.0);
        assert!((s - 50f64.sqrt()).abs() < 1e-12);
        assert!((cell.timesteps().0 - 1400.0 / 3.0).abs() < 1e-9);
    }
}
