use std::hint::black_box;

use biquad_core::bench::{projection_error, EnsembleKind, FunctionEnsemble};
use biquad_core::rules::Projector;
use biquad_core::{build_rule, Domain, InnerProductSpec, OptConfig};
use criterion::{criterion_group, criterion_main, Criterion};

fn build(c: &mut Criterion) {
    let cfg = OptConfig {
        n_starts: 4,
        threads: Some(1),
        ..OptConfig::default()
    };
    let mut g = c.benchmark_group("build");
    g.sample_size(10);
    g.bench_function("interval/l2/6", |b| {
        let ip = InnerProductSpec::l2(Domain::unit_interval());
        b.iter(|| build_rule(Domain::unit_interval(), black_box(6), &ip, &cfg).unwrap())
    });
    g.bench_function("triangle/l2/2", |b| {
        let ip = InnerProductSpec::l2(Domain::Triangle);
        b.iter(|| build_rule(Domain::Triangle, black_box(2), &ip, &cfg).unwrap())
    });
    g.finish();
}

fn apply(c: &mut Criterion) {
    let cfg = OptConfig {
        n_starts: 4,
        ..OptConfig::default()
    };
    let rule = build_rule(
        Domain::Triangle,
        3,
        &InnerProductSpec::l2(Domain::Triangle),
        &cfg,
    )
    .unwrap();
    let proj = Projector::new(&rule).unwrap();
    let values: Vec<f64> = rule
        .points_y
        .iter()
        .map(|p| (p[0] + 2.0 * p[1]).exp())
        .collect();
    c.bench_function("project/triangle/3", |b| {
        b.iter(|| proj.project(black_box(&values)).unwrap())
    });

    let ensemble = FunctionEnsemble::for_rule(EnsembleKind::Tp, &rule, 0);
    let mut g = c.benchmark_group("projection_error");
    g.sample_size(10);
    g.bench_function("tp/100", |b| {
        b.iter(|| projection_error(&rule, &ensemble, 100, 40).unwrap())
    });
    g.finish();
}

criterion_group!(benches, build, apply);
criterion_main!(benches);
