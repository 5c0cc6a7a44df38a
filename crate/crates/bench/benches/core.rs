use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ehsense_bench::{network, noisy, HARVEST, PRIOR};
use ehsense_core::sim::{self, SimConfig};
use ehsense_core::{
    optimize_constrained, BatteryChain, BatteryParams, Capacity, GridSpec, ObservationModel,
};

fn tails(c: &mut Criterion) {
    let mut group = c.benchmark_group("tail_probabilities");
    for s in [1.0, 5.0, 20.0] {
        let model = ObservationModel::rician(s).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(s), &model, |b, m| {
            b.iter(|| m.tail_probabilities(black_box(0.6 * s + 1.0)).unwrap())
        });
    }
    group.finish();
}

fn depletion(c: &mut Criterion) {
    let mut group = c.benchmark_group("depletion");
    for k in [2u32, 100, 100_000] {
        let params = BatteryParams::new(Capacity::Finite(k), 0.15, 0.3).unwrap();
        group.bench_with_input(BenchmarkId::new("closed_form", k), &params, |b, p| {
            b.iter(|| black_box(p).depletion_probability())
        });
        if k <= 100 {
            group.bench_with_input(BenchmarkId::new("chain_solve", k), &params, |b, p| {
                b.iter(|| BatteryChain::new(*black_box(p)).unwrap())
            });
        }
    }
    group.finish();
}

fn optimize(c: &mut Criterion) {
    let model = ObservationModel::rician(5.0).unwrap();
    let grid = GridSpec::default_for(&model);
    c.bench_function("optimize_constrained/s=5", |b| {
        b.iter(|| {
            optimize_constrained(&model, Capacity::Finite(2), HARVEST, PRIOR, &noisy(), &grid)
                .unwrap()
        })
    });
}

fn map_error(c: &mut Criterion) {
    let mut group = c.benchmark_group("map_error_probability");
    for n in [4usize, 12, 20] {
        let scenario = network(n, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &scenario, |b, s| {
            b.iter(|| s.map_error_probability().unwrap())
        });
    }
    group.finish();
}

fn simulate(c: &mut Criterion) {
    let config = SimConfig::new(network(4, 2), 100_000, 1);
    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    group.bench_function("n4_100k_steps", |b| {
        b.iter(|| sim::run(black_box(&config)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, tails, depletion, optimize, map_error, simulate);
criterion_main!(benches);
