use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lightspan::{
    eps_spanner, four_eps_spanner, generate, wmax_spanner, EpsilonSplit, GeneratorKind, GeneratorSpec, SampleConfig,
};

fn instance(n: usize, terminals: usize) -> lightspan::generate::Generated<f64> {
    let mut spec = GeneratorSpec::new(GeneratorKind::ErdosRenyi, n, 7);
    spec.p = 0.15;
    spec.terminals = Some(terminals);
    generate(&spec).expect("generator")
}

fn constructions(c: &mut Criterion) {
    let split = EpsilonSplit::from_eps(0.5).unwrap();
    let mut group = c.benchmark_group("spanner");
    group.sample_size(10);
    for &(n, s) in &[(50usize, 8usize), (100, 16)] {
        let inst = instance(n, s);
        let id = format!("n{n}_s{s}");
        group.bench_with_input(BenchmarkId::new("eps", &id), &inst, |b, inst| {
            b.iter(|| eps_spanner(black_box(&inst.graph), &inst.terminals, &split).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("four-eps", &id), &inst, |b, inst| {
            b.iter(|| four_eps_spanner(black_box(&inst.graph), &inst.terminals, &split).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("wmax", &id), &inst, |b, inst| {
            let cfg = SampleConfig::new(split.clone(), 1);
            b.iter(|| wmax_spanner(black_box(&inst.graph), &inst.terminals, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, constructions);
criterion_main!(benches);
