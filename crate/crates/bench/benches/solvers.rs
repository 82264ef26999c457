use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use patchdyn_bench::reference_model;
use patchdyn_core::analysis::find_crossings;
use patchdyn_core::dynamics::EquilibriumSolver;
use patchdyn_core::random::{irreducible_migration, random_model, rng_for};

fn equilibrium(c: &mut Criterion) {
    let m = reference_model();
    let solver = EquilibriumSolver::default();
    let mut g = c.benchmark_group("equilibrium");
    for beta in [0.01, 1.0, 1e3] {
        g.bench_function(format!("n3_beta_{beta}"), |b| {
            b.iter(|| solver.solve(&m, black_box(beta)).unwrap())
        });
    }
    let m6 = random_model(&mut rng_for(1, 0), 6);
    g.bench_function("n6_beta_1", |b| {
        b.iter(|| solver.solve(&m6, black_box(1.0)).unwrap())
    });
    g.finish();
}

fn crossings(c: &mut Criterion) {
    let m = reference_model();
    let mut g = c.benchmark_group("find_crossings");
    g.sample_size(10);
    g.bench_function("n3_2000_points", |b| {
        b.iter(|| find_crossings(&m, 1e4, black_box(2000)).unwrap())
    });
    g.finish();
}

fn kernel(c: &mut Criterion) {
    let gamma = irreducible_migration(&mut rng_for(2, 0), 8, 0.5);
    c.bench_function("kernel_vector_n8", |b| {
        b.iter(|| black_box(&gamma).kernel_vector().unwrap())
    });
    c.bench_function("spectral_check_n8", |b| {
        b.iter(|| black_box(&gamma).spectral_check())
    });
}

criterion_group!(benches, equilibrium, crossings, kernel);
criterion_main!(benches);
