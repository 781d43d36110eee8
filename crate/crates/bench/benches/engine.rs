use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use scalesim_core::{run, ControllerKind, ScenarioConfig};

fn bench_run(c: &mut Criterion) {
    let scenario = ScenarioConfig::with_name("bench");
    let mut group = c.benchmark_group("run_1h");
    for kind in [ControllerKind::DefaultHpa, ControllerKind::Proposed] {
        group.bench_function(kind.as_str(), |b| {
            b.iter(|| run(black_box(&scenario), kind).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_run);
criterion_main!(benches);
