//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints one PASS/FAIL line; exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use r3l::analysis::{hit_fraction, hitting_probability, sampling_complexity_bound, RandomWalkConfig};
use r3l::bc::{build_dataset, mse_gradient, mse_loss, train_bc, BcConfig, Dataset, Mlp, Policy};
use r3l::env::{Env, EnvId};
use r3l::harness::{derive_seeds, failure_tail_sweep, run_ablation, run_pipeline, ExperimentConfig, Method, Variant};
use r3l::planner::{collect_demos, run_exploration, DemoSet, ExploreConfig};
use r3l::rl::{collect_rollouts, surrogate, surrogate_gradient, LinearBaseline, PgSamples};
use r3l::seed::{derive_seed, rng_from_seed};
use r3l::steering::{BlrPosterior, RffMap, SteeringMode, FEATURES, LENGTHSCALE, NOISE_PRECISION, PRIOR_PRECISION};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

const LEARNED: SteeringMode = SteeringMode::Learned;
const RANDOM: SteeringMode = SteeringMode::Random;

/// Criteria 1 to 4 share one ablation run.
fn ablation() -> Vec<Outcome> {
    let cfg = ExperimentConfig {
        envs: vec![EnvId::MountainCar, EnvId::Pendulum],
        n_runs: 20,
        ..ExperimentConfig::default()
    };
    let table = run_ablation(&cfg).expect("ablation");
    let steps = |env, mode, pg| table.cell(env, mode, pg).expect("cell").timesteps().0;
    let mc = EnvId::MountainCar;

    let (learned, random) = (steps(mc, LEARNED, 0.05), steps(mc, RANDOM, 0.05));
    let c1 = outcome(
        learned < 0.6 * random,
        format!("mountaincar timesteps learned {learned:.1} vs random {random:.1} (ratio {:.3}, need < 0.6)", learned / random),
    );

    let pend = EnvId::Pendulum;
    let (learned_p, random_p) = (steps(pend, LEARNED, 0.05), steps(pend, RANDOM, 0.05));
    let c2 = outcome(
        learned_p < random_p,
        format!("pendulum timesteps learned {learned_p:.1} vs random {random_p:.1}"),
    );

    let cell = table.cell(mc, LEARNED, 0.05).unwrap();
    let (len, len_std) = cell.traj_len();
    let c3 = outcome(
        (60.0..=140.0).contains(&len) && cell.successes() == cell.runs.len(),
        format!("mean |tau| {len:.2} +- {len_std:.2} over {}/{} successful seeds, need [60, 140]", cell.successes(), cell.runs.len()),
    );

    let unbiased = steps(mc, LEARNED, 0.0);
    let c4 = outcome(
        learned <= 1.1 * unbiased,
        format!("mountaincar timesteps p_g=0.05 {learned:.1} vs p_g=0 {unbiased:.1}, need <= 1.1x"),
    );
    vec![c1, c2, c3, c4]
}

fn tail() -> Outcome {
    let budgets = [250, 500, 1000, 2000, 4000];
    let variant = Variant {
        steering: LEARNED,
        goal_bias: 0.05,
    };
    let sweep = failure_tail_sweep(EnvId::MountainCar, variant, &budgets, &derive_seeds(5, 50)).expect("sweep");
    let fractions: Vec<f64> = sweep.outcomes.iter().map(|o| o.failure_fraction()).collect();
    let monotone = fractions.windows(2).all(|w| w[1] <= w[0]);
    match sweep.fit {
        Some(fit) => outcome(
            monotone && fit.b > 0.0,
            format!("failure fractions {fractions:?}, fit a={:.3} b={:.5}", fit.a, fit.b),
        ),
        None => outcome(false, format!("failure fractions {fractions:?}, too few failing budgets to fit")),
    }
}

fn series(a: f64, b: f64, terms: u64) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for k in 1..=terms {
        let y = k as f64 * a * (-b * k as f64).exp() - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

fn bound() -> Outcome {
    let mut worst: f64 = 0.0;
    for a in [1.0, 10.0] {
        for b in [0.05, 2f64.ln(), 4f64.ln()] {
            let v = sampling_complexity_bound(a, b).expect("bound");
            worst = worst.max((v - series(a, b, 1_000_000)).abs());
        }
    }
    let spot = sampling_complexity_bound(1.0, 2f64.ln()).expect("bound");
    outcome(
        worst < 1e-9 && spot == 2.0,
        format!("max |bound - series| {worst:.3e}, bound(1, ln 2) = {spot:?}"),
    )
}

fn hitting() -> Outcome {
    let walk = |d| RandomWalkConfig::isotropic(d, 0.5, 1.0, 0.5 / 20.0, 1_000_000);
    let p3 = hit_fraction(&walk(3), 10_000, 3).expect("walks");
    let p5 = hit_fraction(&walk(5), 10_000, 5).expect("walks");
    let exact = hitting_probability(0.5, 1.0, 3).expect("formula");
    outcome(
        (p3 - exact).abs() <= 0.05 && p5 < p3,
        format!("d=3 hit fraction {p3:.4} (formula {exact}), d=5 {p5:.4}"),
    )
}

fn blr_oracle() -> Outcome {
    let mut rng = rng_from_seed(8);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let rff = RffMap::new(4, FEATURES, LENGTHSCALE, &mut rng);
        let mut blr = BlrPosterior::new(FEATURES, 2, PRIOR_PRECISION, NOISE_PRECISION);
        let n = rng.random_range(1..=50);
        let mut phi = DMatrix::zeros(n, FEATURES);
        let mut y = DMatrix::zeros(n, 2);
        for i in 0..n {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t = [rng.random_range(-1.0..1.0), rng.random_range(-2.0..2.0)];
            let f = rff.features(&x);
            blr.update(&f, &t);
            phi.row_mut(i).copy_from(&DVector::from_column_slice(&f).transpose());
            y[(i, 0)] = t[0];
            y[(i, 1)] = t[1];
        }
        let precision = DMatrix::identity(FEATURES, FEATURES) * PRIOR_PRECISION + phi.transpose() * &phi * NOISE_PRECISION;
        let lu = precision.lu();
        let batch = lu.solve(&(phi.transpose() * &y * NOISE_PRECISION)).expect("solve");
        for (k, w) in blr.weights().iter().enumerate() {
            for (j, v) in w.iter().enumerate() {
                worst = worst.max((v - batch[(j, k)]).abs());
            }
        }
        let q: Vec<f64> = rff.features(&[0.1, -0.3, 0.5, 0.0]);
        let qv = DVector::from_column_slice(&q);
        let var = 1.0 / NOISE_PRECISION + qv.dot(&lu.solve(&qv).expect("solve"));
        worst = worst.max((blr.predictive(&q).1 - var).abs());
    }
    outcome(worst < 1e-8, format!("max deviation from batch posterior {worst:.3e} over 100 datasets"))
}

fn rff_kernel() -> Outcome {
    let mut rng = rng_from_seed(9);
    let map = RffMap::new(4, FEATURES, LENGTHSCALE, &mut rng);
    let l = LENGTHSCALE;
    let mut dev = 0.0;
    for _ in 0..200 {
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.random_range(-l..l)).collect();
        let d2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
        let approx: f64 = map.features(&x).iter().zip(map.features(&y)).map(|(a, b)| a * b).sum();
        dev += (approx - (-d2 / (2.0 * l * l)).exp()).abs() / 200.0;
    }
    outcome(dev < 0.05, format!("mean |k_rff - k_se| {dev:.4} over 200 pairs"))
}

/// Criteria 10 and 13 share the demonstrations.
fn cloning_and_replay() -> Vec<Outcome> {
    let mut env = EnvId::MountainCar.make();
    let spec = env.spec().clone();
    let cfg = ExploreConfig::new(50_000, 0.05, LEARNED, 10);
    let collection = collect_demos(&mut env, &cfg, 10).expect("demos");
    let demos = &collection.demos;
    let data = build_dataset(demos, &spec).expect("dataset");
    let mut policy = Policy::new(&spec, &mut rng_from_seed(11));
    let report = train_bc(&mut policy, &data, &BcConfig { seed: 12, ..BcConfig::default() }).expect("bc");
    let mut rng = rng_from_seed(13);
    let mut reached = 0;
    for _ in 0..100 {
        let mut s = env.reset(&mut rng);
        for _ in 0..spec.horizon {
            let tr = env.step(&policy.forward(&s)).expect("step");
            s = tr.next_state;
            if env.in_goal(&s) {
                reached += 1;
                break;
            }
        }
    }
    let c10 = outcome(
        reached >= 50,
        format!("deterministic cloned policy reached the goal from {reached}/100 resets (bc loss {:.4})", report.final_loss()),
    );

    let mut total = 0;
    let mut exact = 0;
    let mut check = |set: &DemoSet, env: &mut Env| {
        for t in &set.trajectories {
            total += 1;
            exact += usize::from(t.validate(env).is_ok());
        }
    };
    check(demos, &mut env);
    let mut buf = Vec::new();
    demos.write_jsonl(&mut buf, &collection.header(&cfg), &env).expect("write");
    let (_, reread) = DemoSet::read_jsonl(buf.as_slice()).expect("read");
    check(&reread, &mut env);
    let mut pend = EnvId::Pendulum.make();
    let pend_demos = collect_demos(&mut pend, &ExploreConfig::new(50_000, 0.05, LEARNED, 14), 5).expect("demos");
    check(&pend_demos.demos, &mut pend);
    for id in [EnvId::Acrobot, EnvId::CartpoleSwingup] {
        let mut e = id.make();
        for i in 0..5 {
            let run = run_exploration(&mut e, &ExploreConfig::new(2000, 0.05, LEARNED, derive_seed(15, i))).expect("run");
            let set = DemoSet {
                env: id.to_string(),
                trajectories: vec![run.trajectory],
            };
            check(&set, &mut e);
        }
    }
    let c13 = outcome(total > 0 && exact == total, format!("{exact}/{total} extracted trajectories replay bit-exactly"));
    vec![c10, c13]
}

fn pipeline() -> Outcome {
    let cfg = ExperimentConfig {
        envs: vec![EnvId::MountainCar],
        n_runs: 10,
        master_seed: 2024,
        ..ExperimentConfig::default()
    };
    let horizon = EnvId::MountainCar.make().spec().horizon as f64;
    let result = run_pipeline(&cfg).expect("pipeline");
    let failed = result.runs.iter().filter(|r| r.error.is_some()).count();
    let r3l = result.curves(Method::R3lPg);
    let vanilla = result.curves(Method::VanillaPg);
    if r3l.len() != 10 || vanilla.len() != 10 {
        return outcome(false, format!("{failed} seeds failed to produce curves"));
    }
    let offset = r3l.iter().map(|c| c.points[0].cumulative_timesteps).max().unwrap();
    let end = r3l.iter().chain(&vanilla).map(|c| c.points.last().unwrap().cumulative_timesteps).min().unwrap();
    let mut grid: Vec<u64> = r3l
        .iter()
        .chain(&vanilla)
        .flat_map(|c| c.points.iter().map(|p| p.cumulative_timesteps))
        .filter(|&t| t >= offset && t <= end)
        .collect();
    grid.sort_unstable();
    grid.dedup();
    let ours = result.summary(Method::R3lPg, Some(&grid)).expect("summary");
    let theirs = result.summary(Method::VanillaPg, Some(&grid)).expect("summary");
    let ahead = ours.median.iter().zip(&theirs.median).filter(|(a, b)| a > b).count();

    let own = result.summary(Method::VanillaPg, None).expect("summary");
    let q1 = own.q1.expect("quartiles");
    let quarter = q1.len().div_ceil(4);
    let floor = q1[..quarter].iter().filter(|&&v| v == -horizon).count();
    outcome(
        !grid.is_empty() && ahead == grid.len() && floor == quarter,
        format!(
            "r3l median ahead at {ahead}/{} checkpoints past offset {offset} (last {:.1} vs {:.1}); vanilla q1 at -H for {floor}/{quarter} leading checkpoints",
            grid.len(),
            ours.median.last().unwrap_or(&f64::NAN),
            theirs.median.last().unwrap_or(&f64::NAN),
        ),
    )
}

fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

fn central_difference(params: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-5;
    (0..params.len())
        .map(|i| {
            let mut p = params.to_vec();
            p[i] += h;
            let up = f(&p);
            p[i] -= 2.0 * h;
            (up - f(&p)) / (2.0 * h)
        })
        .collect()
}

fn gradients() -> Outcome {
    let mut env = EnvId::MountainCar.make();
    let spec = env.spec().clone();
    let mut rng = rng_from_seed(16);
    let net = Mlp::glorot(&[2, 4, 4, 1], &mut rng);
    let n = net.num_params();

    let data = Dataset {
        inputs: (0..32).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect(),
        targets: (0..32).map(|_| vec![rng.random_range(-1.0..1.0)]).collect(),
    };
    let all: Vec<usize> = (0..data.len()).collect();
    let (_, bc_grad) = mse_gradient(&net, &data, &all);
    let with = |p: &[f64]| {
        let mut m = net.clone();
        m.set_params(p);
        m
    };
    let bc_fd = central_difference(net.params(), |p| mse_loss(&with(p), &data));
    let bc_err = relative_error(&bc_grad, &bc_fd);

    let policy = Policy::with_network(&spec, net.clone(), 0.3);
    let batch = collect_rollouts(&mut env, &policy, spec.horizon, &mut rng).expect("rollouts");
    let mut baseline = LinearBaseline::new(spec.state_bounds.clone(), spec.horizon);
    baseline.fit(&batch);
    let samples = PgSamples::from_batch(&batch, &baseline, &policy);
    let pg_grad = surrogate_gradient(&net, 0.3, &samples);
    let pg_fd = central_difference(net.params(), |p| surrogate(&with(p), 0.3, &samples));
    let pg_err = relative_error(&pg_grad, &pg_fd);
    outcome(
        n <= 50 && bc_err < 1e-3 && pg_err < 1e-3,
        format!("{n} parameters, max relative error bc {bc_err:.2e}, policy gradient {pg_err:.2e}"),
    )
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut results: Vec<(u32, Outcome)> = Vec::new();
    let mut run = |ids: &[u32], f: &dyn Fn() -> Vec<Outcome>| {
        let t = Instant::now();
        for (id, o) in ids.iter().zip(f()) {
            println!(
                "criterion {id:>2}: {} {} [{:.1}s]",
                if o.pass { "PASS" } else { "FAIL" },
                o.detail,
                t.elapsed().as_secs_f64()
            );
            results.push((*id, o));
        }
    };
    run(&[1, 2, 3, 4], &ablation);
    run(&[5], &|| vec![tail()]);
    run(&[6], &|| vec![bound()]);
    run(&[7], &|| vec![hitting()]);
    run(&[8], &|| vec![blr_oracle()]);
    run(&[9], &|| vec![rff_kernel()]);
    run(&[10, 13], &cloning_and_replay);
    run(&[11], &|| vec![pipeline()]);
    run(&[12], &|| vec![gradients()]);

    results.sort_by_key(|(id, _)| *id);
    let failed: Vec<u32> = results.iter().filter(|(_, o)| !o.pass).map(|(id, _)| *id).collect();
    println!(
        "acceptance: {}/{} passed in {:.0}s",
        results.len() - failed.len(),
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
