use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use geovlm_core::geostore::generate_synthetic;
use geovlm_core::retriever::{brute_force_rank, top_k};
use geovlm_core::{Accumulation, SynthConfig};

fn bench_top_k(c: &mut Criterion) {
    let mut group = c.benchmark_group("top_k");
    for n in [1_000usize, 10_000] {
        let cfg = SynthConfig {
            n_locations: n,
            captions: false,
            ..SynthConfig::default()
        };
        let store = generate_synthetic(&cfg, 1).unwrap();
        let q = &store.queries()[0];
        for acc in [Accumulation::F32, Accumulation::F64] {
            group.bench_with_input(BenchmarkId::new(format!("{acc:?}"), n), &n, |b, _| {
                b.iter(|| top_k(&q.id, black_box(&q.image), &store, 10, acc).unwrap())
            });
        }
        group.bench_with_input(BenchmarkId::new("brute_force", n), &n, |b, _| {
            b.iter(|| brute_force_rank(&q.id, black_box(&q.image), &store, Accumulation::F64).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_top_k);
criterion_main!(benches);
