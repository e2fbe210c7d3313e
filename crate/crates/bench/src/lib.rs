//! Benchmark workloads shared by the criterion targets.

use criterion::{black_box, BenchmarkId, Criterion};
use valleyscope_core::chain::{fixtures, random_chain};
use valleyscope_core::cycles::decompose;
use valleyscope_core::hierarchy::full_hierarchy;
use valleyscope_core::potential::{capacity_numeric, stationary_numeric};
use valleyscope_core::simulate::{empirical_generator, exit_time_stats, SimOptions};

fn trace(c: &mut Criterion) {
    let mut group = c.benchmark_group("trace");
    for n in [4usize, 8, 12] {
        let spec = random_chain(n, 17);
        let target = [0, n - 1];
        group.bench_with_input(BenchmarkId::new("monomial", n), &spec, |b, spec| {
            let table = spec.rate_table();
            b.iter(|| table.trace_on(black_box(&target)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("numeric", n), &spec, |b, spec| {
            let table = spec.evaluate_at(1e-2).unwrap().rate_table();
            b.iter(|| table.trace_on(black_box(&target)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("exact_capacity", n), &spec, |b, spec| {
            let chain = spec.evaluate_at(1e-2).unwrap();
            let pi = stationary_numeric(&chain).unwrap();
            b.iter(|| capacity_numeric(&chain, &pi, black_box(&[0]), black_box(&[n - 1])).unwrap())
        });
    }
    group.finish();
}

fn hierarchy(c: &mut Criterion) {
    let mut group = c.benchmark_group("hierarchy");
    group.bench_function("chain_e", |b| {
        let spec = fixtures::chain_e();
        b.iter(|| full_hierarchy(black_box(&spec)).unwrap())
    });
    for n in [6usize, 10] {
        let spec = random_chain(n, 5);
        group.bench_with_input(BenchmarkId::new("random", n), &spec, |b, spec| {
            b.iter(|| full_hierarchy(black_box(spec)).unwrap())
        });
    }
    group.finish();
}

fn cycles(c: &mut Criterion) {
    let mut group = c.benchmark_group("cycles");
    for n in [4usize, 8] {
        let chain = random_chain(n, 23).evaluate_at(0.1).unwrap();
        let pi = stationary_numeric(&chain).unwrap();
        group.bench_with_input(BenchmarkId::new("decompose", n), &chain, |b, chain| {
            b.iter(|| decompose(black_box(chain), &pi).unwrap())
        });
    }
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulation");
    group.sample_size(10);
    let spec = fixtures::chain_e();
    let h = full_hierarchy(&spec).unwrap();
    let level = &h.levels[0];
    group.bench_function("exit_law_2000", |b| {
        b.iter(|| exit_time_stats(&spec, level, 0, 1e-3, 2000, 1, SimOptions::default()).unwrap())
    });
    group.bench_function("generator_4000", |b| {
        b.iter(|| empirical_generator(&spec, level, 1e-3, 4000.0, 2000, 1).unwrap())
    });
    group.finish();
}

pub fn benchmarks(c: &mut Criterion) {
    trace(c);
    hierarchy(c);
    cycles(c);
    simulation(c);
}
