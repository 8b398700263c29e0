use proptest::prelude::*;
use r3l::env::{Env, EnvId};
use r3l::seed::rng_from_seed;

const ALL: [EnvId; 4] = [EnvId::MountainCar, EnvId::Pendulum, EnvId::Acrobot, EnvId::CartpoleSwingup];

fn point_in(env: &Env, unit: &[f64]) -> Vec<f64> {
    let z: Vec<f64> = unit.iter().take(env.spec().state_dim()).map(|u| 2.0 * u - 1.0).collect();
    env.spec().state_bounds.clip(&env.denormalize(&z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn steps_stay_in_bounds_and_repeat(
        which in 0usize..4,
        unit in proptest::collection::vec(0.0f64..=1.0, 4),
        action in proptest::collection::vec(-50.0f64..50.0, 1),
    ) {
        let mut env = ALL[which].make();
        let s = point_in(&env, &unit);
        let a = env.step_from(&s, &action).unwrap();
        let b = env.step_from(&s, &action).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(env.spec().state_bounds.contains(&a.next_state));
        prop_assert!(env.spec().action_bounds.contains(&a.action));
        prop_assert!(a.reward.is_finite());
        prop_assert_eq!(env.interactions(), 2);
    }

    #[test]
    fn normalization_round_trips(which in 0usize..4, unit in proptest::collection::vec(0.0f64..=1.0, 4)) {
        let env = ALL[which].make();
        let s = point_in(&env, &unit);
        let z = env.normalize(&s);
        prop_assert!(z.iter().all(|v| (-1.0 - 1e-12..=1.0 + 1e-12).contains(v)));
        let back = env.denormalize(&z);
        for (x, y) in s.iter().zip(&back) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }
}

#[test]
fn uniform_state_samples_have_box_moments() {
    let n = 100_000;
    for id in ALL {
        let env = id.make();
        let bounds = &env.spec().state_bounds;
        let mut rng = rng_from_seed(17);
        let d = bounds.dim();
        let mut sum = vec![0.0; d];
        for _ in 0..n {
            let s = env.sample_state_uniform(&mut rng);
            assert!(bounds.contains(&s));
            for (acc, z) in sum.iter_mut().zip(env.normalize(&s)) {
                *acc += z;
            }
        }
        // a normalized uniform coordinate has mean 0 and std 1/sqrt(3)
        let tol = 4.0 / (3.0 * n as f64).sqrt();
        for (i, acc) in sum.iter().enumerate() {
            assert!((acc / n as f64).abs() < tol, "{id} coordinate {i}");
        }
    }
}

#[test]
fn resets_are_reproducible_per_seed() {
    for id in ALL {
        let mut env = id.make();
        let a = env.reset(&mut rng_from_seed(5));
        let b = env.reset(&mut rng_from_seed(5));
        assert_eq!(a, b);
        assert!(env.spec().state_bounds.contains(&a));
    }
}
