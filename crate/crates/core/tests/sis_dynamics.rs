use patchdyn_core::linalg;
use patchdyn_core::ode::{integrate, OdeOptions};
use patchdyn_core::random::{irreducible_migration, random_model, rng_for};
use patchdyn_core::sis::{logistic_to_sis, EndemicState, SisModel};
use rand::Rng;

fn sample(seed: u64) -> SisModel {
    let mut rng = rng_for(seed, 0);
    let n = rng.random_range(2..=5);
    let g = irreducible_migration(&mut rng, n, 0.4);
    let b: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..3.0)).collect();
    let c: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.9)).collect();
    SisModel::new(b, c, g, 10.0).unwrap()
}

fn tight() -> OdeOptions {
    OdeOptions {
        atol: 1e-12,
        rtol: 1e-10,
        ..Default::default()
    }
}

#[test]
fn full_system_conserves_population() {
    for seed in 0..5 {
        let sis = sample(seed);
        let n = sis.n();
        let mut y0 = vec![0.0; 2 * n];
        for k in 0..n {
            y0[k] = 1.5 + k as f64;
            y0[n + k] = 0.1;
        }
        let total0: f64 = y0.iter().sum();
        let mut worst: f64 = 0.0;
        integrate(
            |_, y, dy| sis.full_field(2.0, y, dy),
            &y0,
            50.0,
            &tight(),
            |_, y| {
                worst = worst.max((y.iter().sum::<f64>() - total0).abs());
            },
        )
        .unwrap();
        assert!(worst <= 1e-8 * total0, "drift {worst}");
    }
}

#[test]
fn full_and_limit_systems_share_the_endemic_state() {
    for seed in 0..5 {
        let sis = sample(seed);
        let n = sis.n();
        let eps = 1.5;
        let total: f64 = sis.total_n();
        // Unequal initial split of N between patches.
        let weights: Vec<f64> = (0..n).map(|k| 1.0 + k as f64).collect();
        let wsum: f64 = weights.iter().sum();
        let mut y0 = vec![0.0; 2 * n];
        for k in 0..n {
            let nk = total * weights[k] / wsum;
            y0[n + k] = 0.2 * nk;
            y0[k] = nk - y0[n + k];
        }
        let i0 = y0[n..].to_vec();
        let full = integrate(
            |_, y, dy| sis.full_field(eps, y, dy),
            &y0,
            400.0,
            &tight(),
            |_, _| {},
        )
        .unwrap();
        let lim = integrate(
            |_, y, dy| sis.limit_field(eps, y, dy),
            &i0,
            400.0,
            &tight(),
            |_, _| {},
        )
        .unwrap();
        let gap = linalg::max_abs(
            &full.y[n..]
                .iter()
                .zip(&lim.y)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
        assert!(gap <= 1e-6, "terminal gap {gap}");
        let EndemicState::Endemic(e) = sis.endemic_equilibrium(eps).unwrap() else {
            panic!("expected endemic state");
        };
        let to_eq = linalg::max_abs(&lim.y.iter().zip(&e).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert!(to_eq <= 1e-6, "limit trajectory vs equilibrium {to_eq}");
    }
}

#[test]
fn n_star_lies_in_the_kernel() {
    for seed in 0..20 {
        let sis = sample(seed);
        let ns = sis.n_star();
        assert!((ns.iter().sum::<f64>() - sis.total_n()).abs() < 1e-12 * sis.total_n());
        assert!(linalg::max_abs(&sis.gamma().apply(&ns)) <= 1e-10 * sis.total_n());
    }
}

#[test]
fn large_epsilon_total_matches_closed_form() {
    for seed in 0..5 {
        let sis = sample(seed);
        let inf = sis.total_infection_at_infinity();
        assert!(!inf.disease_free);
        let t = sis.endemic_equilibrium(1e5).unwrap().total();
        assert!(
            (t - inf.total).abs() <= 1e-3 * sis.total_n(),
            "{t} vs {}",
            inf.total
        );
    }
}

#[test]
fn mapped_models_reproduce_logistic_derivative() {
    for seed in 0..20 {
        let mut rng = rng_for(seed, 9);
        let n = rng.random_range(2..=6);
        let m = random_model(&mut rng, n);
        let sis = logistic_to_sis(&m, None).unwrap();
        let a = patchdyn_core::derivative_at_zero(&m).unwrap();
        let b = sis.derivative_at_zero().unwrap();
        assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        let inf = sis.total_infection_at_infinity();
        let lim = patchdyn_core::limit_equilibrium(&m).unwrap();
        assert!((inf.total - lim.x_t_infinity).abs() <= 1e-10 * lim.x_t_infinity);
    }
}
