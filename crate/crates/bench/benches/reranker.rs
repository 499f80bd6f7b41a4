use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use geovlm_core::geostore::generate_synthetic;
use geovlm_core::reranker::{init_params, rerank};
use geovlm_core::retriever::retrieve_all;
use geovlm_core::trainer::{build_training_samples, loss_and_gradients, LossOn, SamplePolicy};
use geovlm_core::{Accumulation, RerankerConfig, SynthConfig};

fn bench_reranker(c: &mut Criterion) {
    let cfg = SynthConfig {
        n_locations: 200,
        captions: false,
        ..SynthConfig::default()
    };
    let store = generate_synthetic(&cfg, 1).unwrap();
    let rankings = retrieve_all(&store, 10, Accumulation::F64).unwrap();
    let samples = build_training_samples(&store, &rankings, SamplePolicy::default())
        .unwrap()
        .samples;
    // Full-size network next to the small one used by the synthetic runs.
    for (label, latent, layers) in [("latent64", 64, 1), ("latent512", 512, 2)] {
        let rc = RerankerConfig {
            image_dim: store.image_dim(),
            text_dim: store.text_dim(),
            latent_dim: latent,
            aligner_hidden: latent,
            aligner_layers: layers,
            ..RerankerConfig::default()
        };
        let p32 = init_params(&rc).unwrap();
        let p64 = p32.cast::<f64>();
        let r = &rankings[0];
        let q = store.query(&r.query_id).unwrap();
        c.bench_function(&format!("rerank_top10/{label}"), |b| {
            b.iter(|| rerank(q, black_box(r), &store, &p64).unwrap())
        });
        c.bench_function(&format!("loss_and_gradients/{label}"), |b| {
            b.iter(|| loss_and_gradients(black_box(&samples[0]), &store, &p32, 1.0, LossOn::Scores).unwrap())
        });
    }
}

criterion_group!(benches, bench_reranker);
criterion_main!(benches);
