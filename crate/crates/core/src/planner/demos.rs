use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{run_exploration, ExploreConfig, RunStats, Trajectory};
use crate::env::{Env, EnvId, TransitionRecord};
use crate::error::{invalid, Error, Result};
use crate::seed::derive_seed2;

/// Attempts per demonstration before giving up.
pub const MAX_ATTEMPTS: usize = 10;

/// A set of successful demonstration trajectories for one environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoSet {
    pub env: String,
    pub trajectories: Vec<Trajectory>,
}

/// First line of a demo file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoHeader {
    pub env: String,
    pub seeds: Vec<u64>,
    pub config: ExploreConfig,
    pub trajectories: usize,
}

#[derive(Serialize, Deserialize)]
struct DemoLine {
    traj: usize,
    #[serde(flatten)]
    record: TransitionRecord,
}

impl DemoSet {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Total number of transitions.
    pub fn transitions(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    /// Non-empty, every trajectory successful and replayable in `env`.
    pub fn validate(&self, env: &mut Env) -> Result<()> {
        if self.is_empty() {
            return Err(invalid("demo set is empty"));
        }
        for (i, traj) in self.trajectories.iter().enumerate() {
            if !traj.successful {
                return Err(invalid(format!("demo {i} is not successful")));
            }
            traj.validate(env)?;
        }
        Ok(())
    }

    /// Writes the header line followed by one line per transition tagged
    /// with its trajectory index. Zero-length trajectories have no
    /// transitions and therefore leave no lines.
    pub fn write_jsonl<W: Write>(&self, mut out: W, header: &DemoHeader, env: &Env) -> Result<()> {
        serde_json::to_writer(&mut out, header)?;
        out.write_all(b"\n")?;
        for (i, traj) in self.trajectories.iter().enumerate() {
            for record in traj.to_records(env) {
                serde_json::to_writer(&mut out, &DemoLine { traj: i, record })?;
                out.write_all(b"\n")?;
            }
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<(DemoHeader, DemoSet)> {
        let mut lines = input.lines();
        let header: DemoHeader = match lines.next() {
            Some(line) => serde_json::from_str(&line?)?,
            None => return Err(invalid("empty demo file")),
        };
        let env = header.env.parse::<EnvId>()?.make();
        let mut grouped: BTreeMap<usize, Vec<TransitionRecord>> = BTreeMap::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let DemoLine { traj, record } = serde_json::from_str(&line)?;
            grouped.entry(traj).or_default().push(record);
        }
        let trajectories = grouped
            .values()
            .map(|records| Trajectory::from_records(records, &env))
            .collect::<Result<Vec<_>>>()?;
        Ok((
            header.clone(),
            DemoSet {
                env: header.env,
                trajectories,
            },
        ))
    }
}

#[derive(Clone, Debug)]
pub struct DemoCollection {
    pub demos: DemoSet,
    /// Seed of each successful run, parallel to `demos.trajectories`.
    pub seeds: Vec<u64>,
    /// Every run, failed ones included.
    pub runs: Vec<RunStats>,
    /// Environment steps across all runs.
    pub timesteps: u64,
}

impl DemoCollection {
    pub fn header(&self, config: &ExploreConfig) -> DemoHeader {
        DemoHeader {
            env: self.demos.env.clone(),
            seeds: self.seeds.clone(),
            config: config.clone(),
            trajectories: self.demos.len(),
        }
    }
}

/// Collects `n` successful trajectories, each from a fresh reset, a fresh
/// tree and a fresh steering model. `config.seed` is the master seed; run
/// seeds are derived from (demo slot, attempt). A slot that fails
/// [`MAX_ATTEMPTS`] times aborts collection.
pub fn collect_demos(env: &mut Env, config: &ExploreConfig, n: usize) -> Result<DemoCollection> {
    if n == 0 {
        return Err(invalid("need at least one demonstration"));
    }
    config.validate()?;
    let start = env.interactions();
    let mut trajectories = Vec::with_capacity(n);
    let mut seeds = Vec::with_capacity(n);
    let mut runs = Vec::new();
    for slot in 0..n {
        let mut slot_runs = Vec::new();
        for attempt in 0..MAX_ATTEMPTS {
            let run_config = ExploreConfig {
                seed: derive_seed2(config.seed, slot as u64, attempt as u64),
                ..config.clone()
            };
            let out = run_exploration(env, &run_config)?;
            let success = out.stats.success;
            slot_runs.push(out.stats);
            if success {
                trajectories.push(out.trajectory);
                seeds.push(run_config.seed);
                break;
            }
        }
        let succeeded = slot_runs.last().is_some_and(|r| r.success);
        runs.extend(slot_runs.iter().cloned());
        if !succeeded {
            return Err(Error::ExplorationFailure { runs: slot_runs });
        }
    }
    Ok(DemoCollection {
        demos: DemoSet {
            env: env.name().to_string(),
            trajectories,
        },
        seeds,
        runs,
        timesteps: env.interactions() - start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steering::SteeringMode;

    #[test]
    fn single_demo_reaches_goal() {
        let mut env = EnvId::MountainCar.make();
        let cfg = ExploreConfig::new(20_000, 0.05, SteeringMode::Learned, 1);
        let out = collect_demos(&mut env, &cfg, 1).unwrap();
        assert_eq!(out.demos.len(), 1);
        assert!(out.demos.trajectories[0].last_state()[0] >= 0.45);
        assert_eq!(out.timesteps, out.runs.iter().map(|r| r.timesteps).sum::<u64>());
    }

    #[test]
    fn retry_cap_surfaces_run_stats() {
        let mut env = EnvId::MountainCar.make();
        let cfg = ExploreConfig::new(5, 0.05, SteeringMode::Random, 2);
        match collect_demos(&mut env, &cfg, 1) {
            Err(Error::ExplorationFailure { runs }) => {
                assert_eq!(runs.len(), MAX_ATTEMPTS);
                assert!(runs.iter().all(|r| !r.success && r.timesteps == 5));
            }
            other => panic!("expected exploration failure, got {other:?}"),
        }
    }

    #[test]
    fn zero_demos_rejected() {
        let mut env = EnvId::MountainCar.make();
        let cfg = ExploreConfig::new(5, 0.05, SteeringMode::Random, 2);
        assert!(collect_demos(&mut env, &cfg, 0).is_err());
    }

    #[test]
    fn demo_file_round_trip() {
        let mut env = EnvId::MountainCar.make();
        let cfg = ExploreConfig::new(20_000, 0.05, SteeringMode::Learned, 3);
        let out = collect_demos(&mut env, &cfg, 2).unwrap();
        let mut buf = Vec::new();
        out.demos.write_jsonl(&mut buf, &out.header(&cfg), &env).unwrap();
        let (header, demos) = DemoSet::read_jsonl(&buf[..]).unwrap();
        assert_eq!(header.seeds, out.seeds);
        assert_eq!(header.trajectories, 2);
        assert_eq!(demos, out.demos);
        demos.validate(&mut env).unwrap();
    }
}
