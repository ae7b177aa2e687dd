use criterion::{criterion_group, criterion_main, Criterion};
use tfe10_core::oscillator::{default_cycle_init, find_limit_cycle};
use tfe10_core::{CycleConfig, InterfaceOscillatorParams};

fn cycle(c: &mut Criterion) {
    let params = InterfaceOscillatorParams::new(1.0, 1.0).unwrap();
    let cfg = CycleConfig::default();
    let mut g = c.benchmark_group("limit cycle");
    g.sample_size(10);
    g.bench_function("n = 1", |b| {
        b.iter(|| find_limit_cycle(&params, &default_cycle_init(), &cfg).unwrap())
    });
    g.finish();
}

criterion_group!(benches, cycle);
criterion_main!(benches);
