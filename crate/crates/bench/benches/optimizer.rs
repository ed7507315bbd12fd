use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use heim_bench::{knowledge_graph, rram_2bpc, set_spec};
use heim_core::{optimize, HardwareModel, DEFAULT_MAX_N};

fn optimizer(c: &mut Criterion) {
    let kg = knowledge_graph();
    let hw = rram_2bpc();
    c.bench_function("optimize/knowledge-graph", |b| {
        b.iter(|| optimize(&hw, black_box(&kg), DEFAULT_MAX_N).unwrap())
    });

    let mut g = c.benchmark_group("optimize/set");
    let nominal = HardwareModel::default();
    for m in [21, 101, 501] {
        let spec = set_spec(m);
        g.bench_with_input(BenchmarkId::from_parameter(m), &spec, |b, spec| {
            b.iter(|| optimize(&nominal, black_box(spec), DEFAULT_MAX_N).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, optimizer);
criterion_main!(benches);
