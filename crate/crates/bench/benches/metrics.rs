use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use ragatr_bench::corpus;
use ragatr_core::eval::{run_eval, target_types, EvalConfig};
use ragatr_core::ingest::synthetic_vehicle_specs;
use ragatr_core::metrics::{monte_carlo_baseline, random_baseline_retrieval, MIN_MONTE_CARLO_TRIALS};
use ragatr_core::class_distribution;
use ragatr_core::rag::StubGenerator;

fn baselines(c: &mut Criterion) {
    let records = corpus(9, 50, 16, 5);
    let dist = class_distribution(&records).unwrap();
    c.bench_function("baseline_closed_form", |b| b.iter(|| random_baseline_retrieval(&dist, 5).unwrap()));
    let mut group = c.benchmark_group("baseline_monte_carlo");
    group.sample_size(10);
    group.bench_function("1e5", |b| b.iter(|| monte_carlo_baseline(&dist, 5, MIN_MONTE_CARLO_TRIALS, 1).unwrap()));
    group.finish();
}

fn eval(c: &mut Criterion) {
    let records = corpus(9, 100, 32, 6);
    let specs = synthetic_vehicle_specs(target_types(&records).iter().map(String::as_str), 6);
    let generator = StubGenerator::new(Arc::new(specs.clone()));
    let cfg = EvalConfig { seeds: vec![1], ..EvalConfig::default() };
    let mut group = c.benchmark_group("eval");
    group.sample_size(10);
    group.bench_function("stub_900", |b| {
        b.iter(|| run_eval(&records, &specs, &generator, "stub", &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, baselines, eval);
criterion_main!(benches);
