use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::Matrix4;
use noether_lab::symmetry::{certify_free, CertifyOptions};
use noether_lab::variational::{action_gradient, solve_stationary, GaugeOption, WorldPath};
use noether_lab::{exp_generator, Dim, Event, Generator, LagrangianSpec, ModelKind, Phi, Quantity, SamplingConfig};

const NR: ModelKind = ModelKind::NonRelativistic;
const R: ModelKind = ModelKind::Relativistic;

fn magnetic() -> LagrangianSpec {
    let mut b = Matrix4::zeros();
    for (i, j, v) in [(1, 2, 0.5), (0, 1, 0.2)] {
        b[(i, j)] = v;
        b[(j, i)] = -v;
    }
    LagrangianSpec::counterexample_b(Event::new(NR, [0.0, 0.3, -0.2, 0.0]), b, Phi::Kinetic { m: 1.0, c: [0.0; 3] })
        .unwrap()
}

fn free_rel() -> LagrangianSpec {
    LagrangianSpec::free_rel(Quantity::new(1.0, Dim::PER_SECOND)).unwrap()
}

fn gradient(c: &mut Criterion) {
    let mut g = c.benchmark_group("action_gradient");
    for n in [64, 512] {
        let l = magnetic();
        let p = WorldPath::straight(&Event::new(NR, [0.0; 4]), &Event::new(NR, [1.5, 1.0, 0.5, 0.2]), n).unwrap();
        g.bench_with_input(BenchmarkId::new("magnetic", n), &p, |b, p| b.iter(|| action_gradient(&l, black_box(p))));
    }
    g.finish();
}

fn solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    let (a, b) = (Event::new(NR, [0.0; 4]), Event::new(NR, [1.5, 1.0, 0.5, 0.2]));
    let l = magnetic();
    g.bench_function("magnetic_n200", |bn| bn.iter(|| solve_stationary(&l, &a, &b, 200, GaugeOption::Projection)));
    let (a, b) = (Event::new(R, [0.0; 4]), Event::new(R, [5.0, 3.0, 1.0, 0.0]));
    let l = free_rel();
    for gauge in [GaugeOption::UniformChord, GaugeOption::Projection] {
        g.bench_function(format!("free_rel_n64_{gauge}"), |bn| bn.iter(|| solve_stationary(&l, &a, &b, 64, gauge)));
    }
    g.finish();
}

fn certify(c: &mut Criterion) {
    let mut g = c.benchmark_group("certify");
    g.sample_size(10);
    let opts = CertifyOptions {
        sampling: SamplingConfig { points: 64, directions: 8, ..Default::default() },
        random_elements: 4,
        ..Default::default()
    };
    let l = magnetic();
    g.bench_function("magnetic", |b| b.iter(|| certify_free(&l, black_box(&opts))));
    let l = free_rel();
    g.bench_function("free_rel", |b| b.iter(|| certify_free(&l, black_box(&opts))));
    g.finish();
}

fn exp(c: &mut Criterion) {
    let h = Generator::boost(R, 1).unwrap();
    c.bench_function("exp_boost", |b| b.iter(|| exp_generator(black_box(&h), black_box(0.7))));
}

criterion_group!(kernels, gradient, solve, certify, exp);
criterion_main!(kernels);
