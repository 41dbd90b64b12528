use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use inghamlab::analysis::spectral::hermitian_extremes;
use inghamlab::analysis::SampledFactor;
use inghamlab::basisfuncs::{divided_difference, divided_difference_hermite_genocchi};
use inghamlab::gram::{assemble_gram, DividedDifferenceSystem};
use inghamlab::DirectionAssignment;
use inghamlab_bench::{clustered_basis, perturbed_system, unit_interval_2pi};

fn gram_assembly(c: &mut Criterion) {
    let i = unit_interval_2pi();
    let mut group = c.benchmark_group("gram_assembly");
    for n in [32, 64, 128] {
        let sys = perturbed_system(n, 2);
        group.bench_with_input(BenchmarkId::new("exponential", 2 * n + 1), &sys, |b, sys| {
            b.iter(|| assemble_gram(black_box(sys), &i).unwrap())
        });
    }
    let basis = clustered_basis(8, 1e-3);
    let u = DirectionAssignment::constant(basis.family(), 1, 1).unwrap();
    let dd = DividedDifferenceSystem::raw(basis, u).unwrap().with_origin(i.midpoint());
    group.bench_function("divided_difference_34", |b| b.iter(|| assemble_gram(black_box(&dd), &i).unwrap()));
    group.finish();
}

fn extremes(c: &mut Criterion) {
    let i = unit_interval_2pi();
    let mut group = c.benchmark_group("extreme_eigenvalues");
    group.sample_size(20);
    for n in [32, 64, 128] {
        let sys = perturbed_system(n, 1);
        let g = assemble_gram(&sys, &i).unwrap();
        group.bench_with_input(BenchmarkId::new("dense", 2 * n + 1), &g, |b, g| {
            b.iter(|| hermitian_extremes(black_box(g.entries())).unwrap())
        });
        let factor = SampledFactor::new(&sys, &i).unwrap();
        group.bench_with_input(BenchmarkId::new("factored", 2 * n + 1), &factor, |b, f| {
            b.iter(|| f.extremes(0..f.columns(), None).unwrap())
        });
    }
    group.finish();
}

fn divided_differences(c: &mut Criterion) {
    let mut group = c.benchmark_group("divided_difference");
    let nodes = [-0.4, 0.1, 0.9, 1.3, 2.0];
    for r in [2, 3, 5] {
        group.bench_with_input(BenchmarkId::new("recurrence", r), &nodes[..r], |b, w| {
            b.iter(|| divided_difference(black_box(w), 2.5).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("hermite_genocchi", r), &nodes[..r], |b, w| {
            b.iter(|| divided_difference_hermite_genocchi(black_box(w), 2.5, 16).unwrap())
        });
    }
    let clustered = [0.7, 0.7 + 1e-7, 0.7 + 3e-7];
    group.bench_function("recurrence_confluent_3", |b| b.iter(|| divided_difference(black_box(&clustered), 2.5).unwrap()));
    group.finish();
}

criterion_group!(benches, gram_assembly, extremes, divided_differences);
criterion_main!(benches);
