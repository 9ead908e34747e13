use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use twolevel_core::solvers::solve_monolithic_steady;

fn monolithic(c: &mut Criterion) {
    let mut group = c.benchmark_group("monolithic_steady");
    group.sample_size(10);
    for n in [20, 40, 80] {
        let cfg = twolevel_bench::config(n, 2 * n);
        let (space, _) = twolevel_bench::spaces(&cfg);
        let material = cfg.material.to_model();
        let strip = cfg.geometry.strip().unwrap();
        let sources = cfg.source.to_sources(cfg.boundary_temperature);
        group.bench_with_input(BenchmarkId::from_parameter(n), &space, |b, s| b.iter(|| solve_monolithic_steady(s, &material, strip, &sources).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, monolithic);
criterion_main!(benches);
