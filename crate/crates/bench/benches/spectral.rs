use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use koornwalk::oracle::truncated_power;
use koornwalk::spectral::{build_rule_with_nodes, distribution_at, tv_distance};
use koornwalk::{ChainSpec, KoornwinderParams};

fn tv(c: &mut Criterion) {
    let spec = ChainSpec::chebyshev(1.0, 0).unwrap();
    let mut g = c.benchmark_group("tv_distance");
    g.sample_size(10);
    for t in [100u64, 1_000, 10_000] {
        g.bench_with_input(BenchmarkId::from_parameter(t), &t, |b, &t| {
            b.iter(|| tv_distance(black_box(&spec), t).unwrap())
        });
    }
    g.finish();
}

fn distribution(c: &mut Criterion) {
    let spec = ChainSpec::chebyshev(2.0, 3).unwrap();
    let mut g = c.benchmark_group("distribution");
    g.sample_size(10);
    for t in [100u64, 1_000] {
        g.bench_with_input(BenchmarkId::new("spectral", t), &t, |b, &t| {
            b.iter(|| distribution_at(black_box(&spec), t).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("matrix_power", t), &t, |b, &t| {
            b.iter(|| truncated_power(black_box(&spec), t, 3 + t as usize).unwrap())
        });
    }
    g.finish();
}

fn rules(c: &mut Criterion) {
    let jacobi = KoornwinderParams::new(0.5, -0.25, 1.0).unwrap();
    let cheb = KoornwinderParams::chebyshev(1.0).unwrap();
    let mut g = c.benchmark_group("quadrature_rule");
    g.sample_size(10);
    for k in [100usize, 1_000, 10_000] {
        g.bench_with_input(BenchmarkId::new("gauss_jacobi", k), &k, |b, &k| {
            b.iter(|| build_rule_with_nodes(jacobi, black_box(k)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("gauss_chebyshev", k), &k, |b, &k| {
            b.iter(|| build_rule_with_nodes(cheb, black_box(k)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, tv, distribution, rules);
criterion_main!(benches);
