use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ordsieve_bench::fixture;
use ordsieve_core::estimator::{criterion as closed_form, SpectralCriterion};

fn criterion_routes(c: &mut Criterion) {
    let mut group = c.benchmark_group("criterion");
    group.sample_size(10);
    for n in [500, 1000] {
        let f = fixture(n);
        let cfg = f.cfg.criterion_config().unwrap();
        let sim = f.panel.simulate(&f.truth.0, &f.truth.1);
        group.bench_with_input(BenchmarkId::new("closed_form", n), &n, |b, _| {
            b.iter(|| closed_form(black_box(f.data.rows()), black_box(&sim), &cfg).unwrap())
        });
    }
    for n in [1000, 4000] {
        let f = fixture(n);
        let cfg = f.cfg.criterion_config().unwrap();
        let sim = f.panel.simulate(&f.truth.0, &f.truth.1);
        let spectral = SpectralCriterion::new(f.data.rows(), &cfg).unwrap();
        group.bench_with_input(BenchmarkId::new("spectral", n), &n, |b, _| {
            b.iter(|| spectral.evaluate(black_box(&sim)).unwrap())
        });
    }
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let f = fixture(4000);
    c.bench_function("panel_simulate_4000", |b| {
        b.iter(|| f.panel.simulate(black_box(&f.truth.0), black_box(&f.truth.1)))
    });
    let (xi, eps) = &f.truth;
    c.bench_function("sieve_quantile", |b| {
        b.iter(|| {
            (1..100)
                .map(|i| xi.quantile_unchecked(i as f64 / 100.0) + eps.quantile_unchecked(i as f64 / 100.0))
                .sum::<f64>()
        })
    });
}

criterion_group!(benches, criterion_routes, simulation);
criterion_main!(benches);
