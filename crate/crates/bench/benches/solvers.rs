use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use std::hint::black_box;

use outwave_bench::{bench_bump, bench_grid, char_state, outgoing_data, system_state};
use outwave_core::linear_wave::LinearFlow;
use outwave_core::{evolve, nonlocal, projection};

fn bench_nonlocal(c: &mut Criterion) {
    let mut group = c.benchmark_group("nonlocal_apply");
    for n in [1025usize, 4097] {
        let f = bench_bump(bench_grid(n));
        group.bench_with_input(BenchmarkId::from_parameter(n), &f, |b, f| {
            b.iter(|| nonlocal::apply(black_box(f)))
        });
    }
    group.finish();
}

fn bench_projection(c: &mut Criterion) {
    let mut group = c.benchmark_group("projection_decompose");
    for n in [1025usize, 4097] {
        let data = outgoing_data(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &data, |b, d| {
            b.iter(|| projection::decompose(black_box(d)))
        });
    }
    group.finish();
}

fn bench_propagate(c: &mut Criterion) {
    let mut group = c.benchmark_group("linear_propagate");
    for n in [1025usize, 4097] {
        let flow = LinearFlow::new(&outgoing_data(n));
        let t = 4.0;
        group.bench_with_input(BenchmarkId::from_parameter(n), &flow, |b, flow| {
            b.iter(|| flow.propagate(black_box(t)).unwrap())
        });
    }
    group.finish();
}

fn bench_steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    for n in [1025usize, 4097] {
        group.bench_function(BenchmarkId::new("characteristics", n), |b| {
            b.iter_batched_ref(
                || char_state(n),
                |state| evolve::step_characteristics(black_box(state)).unwrap(),
                BatchSize::SmallInput,
            )
        });
        group.bench_function(BenchmarkId::new("system_rk4", n), |b| {
            b.iter_batched_ref(
                || system_state(n),
                |state| evolve::step_system(black_box(state)).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    bench_nonlocal,
    bench_projection,
    bench_propagate,
    bench_steps
);
criterion_main!(benches);
