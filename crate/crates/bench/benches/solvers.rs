use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use lqgame::*;

fn riccati(c: &mut Criterion) {
    let spec = paper_example();
    let aug = augment(&spec);
    c.bench_function("backward N=50", |b| {
        b.iter(|| backward(black_box(&aug), &spec.weights, 50).unwrap())
    });
    c.bench_function("backward N=500", |b| {
        b.iter(|| backward(black_box(&aug), &spec.weights, 500).unwrap())
    });
    c.bench_function("forward_steady", |b| {
        b.iter(|| forward_steady(black_box(&aug), &spec.weights, SteadyOptions::default()).unwrap())
    });
}

fn filters_and_costs(c: &mut Criterion) {
    let spec = paper_example();
    let aug = augment(&spec);
    let rt = backward(&aug, &spec.weights, spec.horizon).unwrap();
    let cov = covariance_forward(&aug, &spec.system.sigma, &rt.k2).unwrap();
    c.bench_function("covariance_forward N=50", |b| {
        b.iter(|| covariance_forward(black_box(&aug), &spec.system.sigma, &rt.k2).unwrap())
    });
    c.bench_function("analytic costs", |b| {
        b.iter(|| {
            (
                analytic_cost_asym(black_box(&spec), &rt, &cov).unwrap(),
                analytic_cost_sym(black_box(&spec), &rt, &cov).unwrap(),
            )
        })
    });
    c.bench_function("moment_oracle", |b| {
        b.iter(|| moment_oracle(black_box(&spec), &nash_profile(&rt)).unwrap())
    });
}

fn monte_carlo(c: &mut Criterion) {
    let spec = paper_example();
    let aug = augment(&spec);
    let rt = backward(&aug, &spec.weights, spec.horizon).unwrap();
    let profile = nash_profile(&rt);
    let cl = ClosedLoop::new(&spec, &profile).unwrap();
    let mut group = c.benchmark_group("monte carlo");
    group.sample_size(10);
    let mut seed = 0;
    group.bench_function("estimate_costs M=1000", |b| {
        b.iter_batched(
            || {
                seed += 1;
                seed
            },
            |s| cl.estimate_costs(&profile, 1000, s),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

criterion_group!(benches, riccati, filters_and_costs, monte_carlo);
criterion_main!(benches);
