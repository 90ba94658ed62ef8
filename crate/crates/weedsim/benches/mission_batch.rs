//! Seed-batch throughput: the worker-pool runner against the
//! single-threaded one, across batch sizes.
//!
//! Build with `--no-default-features` to measure the fallback build, where
//! `run_batch` degrades to the sequential runner.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use weedsim::scenario::Scenario;

fn batch_runners(c: &mut Criterion) {
    // a field wider than the array, so plans have several stops
    let overrides = [
        ("field.cols".to_string(), "60".to_string()),
        ("field.weed_fraction".to_string(), "0.25".to_string()),
    ];
    let mission = Scenario::from_toml_str_with_overrides("", &overrides)
        .expect("stock scenario parses")
        .resolve()
        .expect("stock scenario resolves")
        .mission;

    let mut group = c.benchmark_group("mission_batch");
    for &n in &[8usize, 32, 128] {
        let seeds: Vec<u64> = (0..n as u64).collect();
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::new("pooled", n), &seeds, |b, seeds| {
            b.iter(|| mission.run_batch(seeds).expect("mission runs"));
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &seeds, |b, seeds| {
            b.iter(|| mission.run_batch_seq(seeds).expect("mission runs"));
        });
    }
    group.finish();
}

criterion_group!(benches, batch_runners);
criterion_main!(benches);
