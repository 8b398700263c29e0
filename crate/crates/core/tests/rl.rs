use nalgebra::{DMatrix, DVector};
use r3l::bc::{build_dataset, train_bc, BcConfig, Policy};
use r3l::env::EnvId;
use r3l::planner::{collect_demos, ExploreConfig};
use r3l::rl::{collect_rollouts, default_batch_timesteps, refine, LinearBaseline, RefineConfig, TrpoConfig};
use r3l::seed::{derive_seed, rng_from_seed};
use r3l::steering::SteeringMode;

fn one_iteration(env_id: EnvId) -> RefineConfig {
    let spec = env_id.make().spec().clone();
    RefineConfig {
        iterations: 1,
        batch_timesteps: default_batch_timesteps(&spec),
        trpo: TrpoConfig::default(),
        timestep_offset: 0,
    }
}

#[test]
fn baseline_matches_svd_least_squares() {
    let mut env = EnvId::MountainCar.make();
    let spec = env.spec().clone();
    let mut rng = rng_from_seed(31);
    let policy = Policy::new(&spec, &mut rng);
    let batch = collect_rollouts(&mut env, &policy, 2000, &mut rng).unwrap();
    let mut baseline = LinearBaseline::new(spec.state_bounds.clone(), spec.horizon);
    baseline.fit(&batch);

    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for ep in &batch.episodes {
        for t in 0..ep.len() {
            rows.extend(baseline.features(&ep.states[t], t));
            targets.push(ep.returns_to_go[t]);
        }
    }
    let k = baseline.num_features();
    let x = DMatrix::from_row_slice(targets.len(), k, &rows);
    let y = DVector::from_column_slice(&targets);
    let w = x.clone().svd(true, true).solve(&y, 1e-12).unwrap();
    let ours = DVector::from_column_slice(baseline.weights().unwrap());
    let fitted_svd = &x * &w;
    let fitted_ours = &x * &ours;
    let scale = y.amax();
    assert!((fitted_svd - fitted_ours).amax() < 1e-8 * scale);
}

#[test]
fn cloned_policy_starts_above_the_floor() {
    let mut env = EnvId::MountainCar.make();
    let spec = env.spec().clone();
    let cfg = ExploreConfig::new(50_000, 0.05, SteeringMode::Learned, 41);
    let demos = collect_demos(&mut env, &cfg, 10).unwrap().demos;
    let data = build_dataset(&demos, &spec).unwrap();
    let mut policy = Policy::new(&spec, &mut rng_from_seed(42));
    train_bc(&mut policy, &data, &BcConfig { seed: 43, ..BcConfig::default() }).unwrap();
    let curve = refine(&mut policy, &mut env, &one_iteration(EnvId::MountainCar), &mut rng_from_seed(44)).unwrap();
    assert!(curve[0].mean_return > -(spec.horizon as f64), "{}", curve[0].mean_return);
    assert!(curve[0].success_rate > 0.0);
}

#[test]
fn random_policies_start_at_the_floor() {
    let mut env = EnvId::MountainCar.make();
    let spec = env.spec().clone();
    for i in 0..5 {
        let mut policy = Policy::new(&spec, &mut rng_from_seed(derive_seed(50, i)));
        let curve = refine(&mut policy, &mut env, &one_iteration(EnvId::MountainCar), &mut rng_from_seed(derive_seed(60, i))).unwrap();
        assert_eq!(curve[0].mean_return, -(spec.horizon as f64), "seed {i}");
        assert_eq!(curve[0].success_rate, 0.0);
    }
}

#[test]
fn curve_timesteps_are_monotone_and_offset() {
    let mut env = EnvId::Pendulum.make();
    let spec = env.spec().clone();
    let mut policy = Policy::new(&spec, &mut rng_from_seed(70));
    let cfg = RefineConfig {
        iterations: 3,
        batch_timesteps: spec.horizon,
        trpo: TrpoConfig::default(),
        timestep_offset: 1234,
    };
    let curve = refine(&mut policy, &mut env, &cfg, &mut rng_from_seed(71)).unwrap();
    assert_eq!(curve.len(), 3);
    assert_eq!(curve[0].cumulative_timesteps, 1234 + spec.horizon as u64);
    assert!(curve.windows(2).all(|w| w[1].cumulative_timesteps > w[0].cumulative_timesteps));
    assert!(curve.iter().all(|p| p.kl <= cfg.trpo.kl_limit && p.mean_return.is_finite()));
}
