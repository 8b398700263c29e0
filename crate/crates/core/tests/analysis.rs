use r3l::analysis::{failures_by_budget, fit_failure_tail, hit_fraction, hitting_probability, RandomWalkConfig};

#[test]
fn four_dimensional_walks_hit_at_the_formula_rate() {
    let cfg = RandomWalkConfig::isotropic(4, 0.5, 1.0, 0.5 / 20.0, 1_000_000);
    let p = hitting_probability(0.5, 1.0, 4).unwrap();
    assert_eq!(p, 0.25);
    let mc = hit_fraction(&cfg, 10_000, 4).unwrap();
    assert!((mc - p).abs() < 0.05, "{mc}");
}

#[test]
fn hit_fraction_falls_with_dimension() {
    let fractions: Vec<f64> = [3, 6]
        .iter()
        .map(|&d| hit_fraction(&RandomWalkConfig::isotropic(d, 0.5, 1.0, 0.025, 1_000_000), 3000, 9).unwrap())
        .collect();
    assert!(fractions[1] < fractions[0], "{fractions:?}");
}

#[test]
fn budget_outcomes_count_runs_beyond_each_budget() {
    let steps = [Some(10), Some(300), None, Some(1000), Some(999), Some(1)];
    let outcomes = failures_by_budget(&steps, &[1, 10, 500, 1000]);
    let brute: Vec<usize> = [1u64, 10, 500, 1000]
        .iter()
        .map(|&k| steps.iter().filter(|s| s.is_none_or(|n| n > k)).count())
        .collect();
    assert_eq!(outcomes.iter().map(|o| o.failures).collect::<Vec<_>>(), brute);
    assert!(outcomes.iter().all(|o| o.runs == steps.len()));
    let fit = fit_failure_tail(&outcomes).unwrap();
    assert!(fit.b > 0.0);
}
