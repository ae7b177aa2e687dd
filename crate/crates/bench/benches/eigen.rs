use criterion::{criterion_group, criterion_main, Criterion};
use tfe10_core::eigensolver::solve_linear_n0;
use tfe10_core::EigenConfig;

fn linear(c: &mut Criterion) {
    let cfg = EigenConfig::default();
    let mut g = c.benchmark_group("linear eigenfunction");
    g.sample_size(10);
    for k in [0, 1] {
        g.bench_function(format!("k = {k}"), |b| b.iter(|| solve_linear_n0(k, 160.0, &cfg).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, linear);
criterion_main!(benches);
