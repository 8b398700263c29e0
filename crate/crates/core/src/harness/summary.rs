use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rl::CurvePoint;

/// A learning curve tagged with its environment and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledCurve {
    pub env: String,
    pub seed: u64,
    pub points: Vec<CurvePoint>,
}

/// Return of the last point at or before `t`; `None` before the first one.
pub fn step_value(points: &[CurvePoint], t: u64) -> Option<f64> {
    let idx = points.partition_point(|p| p.cumulative_timesteps <= t);
    idx.checked_sub(1).map(|i| points[i].mean_return)
}

/// Percentile of sorted data with linear interpolation between order
/// statistics (`q` in `[0, 1]`).
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&q));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median and quartiles across seeds at shared timestep checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub env: String,
    pub n_seeds: usize,
    pub checkpoints: Vec<u64>,
    pub median: Vec<f64>,
    /// Quartiles need at least three seeds.
    pub q1: Option<Vec<f64>>,
    pub q3: Option<Vec<f64>>,
}

impl CurveSummary {
    pub fn iqr(&self) -> Result<Vec<f64>> {
        match (&self.q1, &self.q3) {
            (Some(q1), Some(q3)) => Ok(q3.iter().zip(q1).map(|(a, b)| a - b).collect()),
            _ => Err(Error::InsufficientData(format!(
                "interquartile range needs 3 or more seeds, have {}",
                self.n_seeds
            ))),
        }
    }
}

/// Step-interpolates every curve at `checkpoints` and reduces across seeds.
/// Without explicit checkpoints, uses every recorded timestep at which all
/// curves are defined.
pub fn summarize(curves: &[LabeledCurve], checkpoints: Option<&[u64]>) -> Result<CurveSummary> {
    let first = curves.first().ok_or_else(|| invalid("no curves to summarize"))?;
    if let Some(c) = curves.iter().find(|c| c.env != first.env) {
        return Err(invalid(format!("mixed environments: {} and {}", first.env, c.env)));
    }
    if curves.iter().any(|c| c.points.is_empty()) {
        return Err(invalid("empty learning curve"));
    }
    let start = curves.iter().map(|c| c.points[0].cumulative_timesteps).max().unwrap();
    let checkpoints: Vec<u64> = match checkpoints {
        Some(cp) => {
            if let Some(t) = cp.iter().find(|&&t| t < start) {
                return Err(invalid(format!("checkpoint {t} precedes the start of a curve")));
            }
            cp.to_vec()
        }
        None => {
            let mut all: Vec<u64> = curves
                .iter()
                .flat_map(|c| c.points.iter().map(|p| p.cumulative_timesteps))
                .filter(|&t| t >= start)
                .collect();
            all.sort_unstable();
            all.dedup();
            all
        }
    };
    let with_quartiles = curves.len() >= 3;
    let (mut median, mut q1, mut q3) = (Vec::new(), Vec::new(), Vec::new());
    for &t in &checkpoints {
        let mut vals: Vec<f64> = curves
            .iter()
            .map(|c| step_value(&c.points, t).expect("checkpoint past every start"))
            .collect();
        vals.sort_by(f64::total_cmp);
        median.push(percentile(&vals, 0.5));
        if with_quartiles {
            q1.push(percentile(&vals, 0.25));
            q3.push(percentile(&vals, 0.75));
        }
    }
    Ok(CurveSummary {
        env: first.env.clone(),
        n_seeds: curves.len(),
        checkpoints,
        median,
        q1: with_quartiles.then_some(q1),
        q3: with_quartiles.then_some(q3),
    })
}
