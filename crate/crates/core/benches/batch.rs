use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use wifair::mac::{RecordLevel, SimConfig};
use wifair::par::{run_batch, run_batch_sequential};
use wifair::policy::PolicySpec;
use wifair::units::Topology;

fn configs(n: u64, horizon: u64) -> Vec<SimConfig> {
    let t = Topology::from_db(&[-15.0, -15.0, -15.0, -33.0, -33.0, -40.0, -40.0], 5.0, -45.0).unwrap();
    (0..n)
        .map(|seed| {
            let mut cfg = SimConfig::saturated(t.clone(), PolicySpec::Dcf80211 { initial_cw: 8 }, horizon, seed);
            cfg.record = RecordLevel::Summary;
            cfg
        })
        .collect()
}

fn batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("batch_8x20k");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("mode", "sequential"), |b| {
        b.iter(|| run_batch_sequential(configs(8, 20_000)))
    });
    group.bench_function(BenchmarkId::new("mode", "parallel"), |b| b.iter(|| run_batch(configs(8, 20_000))));
    group.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
