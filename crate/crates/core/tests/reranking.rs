//! Reranking, training and synthetic-data behavior through the public API.

use std::collections::BTreeSet;

use geovlm_core::evaluator::recall_at_k;
use geovlm_core::geostore::generate_synthetic;
use geovlm_core::reranker::{init_params, rerank, score_pair_traced, to_real, PairInput};
use geovlm_core::retriever::{cosine_with, retrieve_all};
use geovlm_core::trainer::{
    build_training_samples, loss_and_gradients, train, LossOn, OptimizerKind, SamplePolicy, TrainError,
};
use geovlm_core::{
    Accumulation, GeoStore, Ranking, RerankerConfig, RerankerParams, SynthConfig, TrainConfig, TrainingSample,
};

fn small_store(seed: u64) -> GeoStore {
    let cfg = SynthConfig {
        n_locations: 60,
        image_dim: 16,
        text_dim: 8,
        ..SynthConfig::default()
    };
    generate_synthetic(&cfg, seed).unwrap()
}

fn small_config(store: &GeoStore) -> RerankerConfig {
    RerankerConfig {
        image_dim: store.image_dim(),
        text_dim: store.text_dim(),
        latent_dim: 8,
        aligner_hidden: 6,
        aligner_layers: 2,
        init_seed: 5,
        ..RerankerConfig::default()
    }
}

fn small_samples(store: &GeoStore) -> Vec<TrainingSample> {
    let rankings = retrieve_all(store, 10, Accumulation::F64).unwrap();
    build_training_samples(store, &rankings, SamplePolicy::default())
        .unwrap()
        .samples
}

fn quick_train_config() -> TrainConfig {
    TrainConfig {
        lr: 1e-2,
        epochs: 3,
        batch_size: 8,
        shuffle_seed: 11,
        ..TrainConfig::default()
    }
}

fn sorted_ids(r: &Ranking) -> Vec<String> {
    let mut v: Vec<String> = r.ids().map(str::to_owned).collect();
    v.sort();
    v
}

#[test]
fn rerank_permutes_the_candidate_set() {
    let store = small_store(1);
    let params = init_params(&small_config(&store)).unwrap().cast::<f64>();
    for r in retrieve_all(&store, 10, Accumulation::F64).unwrap() {
        let q = store.query(&r.query_id).unwrap();
        let out = rerank(q, &r, &store, &params).unwrap();
        assert!(out.reranked);
        assert_eq!(out.query_id, r.query_id);
        assert_eq!(sorted_ids(&out), sorted_ids(&r));
        assert!(out.entries.windows(2).all(|w| w[0].score >= w[1].score));
        assert!(out.entries.iter().all(|e| e.score > 0.0 && e.score < 1.0));
    }
}

#[test]
fn rerank_of_single_candidate_is_identity() {
    let store = small_store(2);
    let params = init_params(&small_config(&store)).unwrap().cast::<f64>();
    for r in retrieve_all(&store, 1, Accumulation::F64).unwrap() {
        let out = rerank(store.query(&r.query_id).unwrap(), &r, &store, &params).unwrap();
        assert_eq!(sorted_ids(&out), sorted_ids(&r));
    }
}

#[test]
fn constant_scores_fall_back_to_id_order() {
    let store = small_store(3);
    let mut params = init_params(&small_config(&store)).unwrap().cast::<f64>();
    params.score_weight.iter_mut().for_each(|w| *w = 0.0);
    for r in retrieve_all(&store, 10, Accumulation::F64).unwrap() {
        let out = rerank(store.query(&r.query_id).unwrap(), &r, &store, &params).unwrap();
        let ids: Vec<String> = out.ids().map(str::to_owned).collect();
        assert_eq!(ids, sorted_ids(&r));
        assert!(out.entries.iter().all(|e| e.score == 0.5));
    }
}

fn logit(store: &GeoStore, q: &str, r: &str, params: &RerankerParams<f64>) -> f64 {
    let q = store.query(q).unwrap();
    let r = store.reference(r).unwrap();
    let (qi, qt) = (to_real::<f64>(q.image.values()), to_real::<f64>(q.text.as_ref().unwrap().values()));
    let (ri, rt) = (to_real::<f64>(r.image.values()), to_real::<f64>(r.text.as_ref().unwrap().values()));
    score_pair_traced(
        PairInput { image: &qi, text: &qt },
        PairInput { image: &ri, text: &rt },
        params,
    )
    .unwrap()
    .logit
}

#[test]
fn separated_negatives_contribute_no_gradient() {
    let store = small_store(4);
    let params = init_params(&small_config(&store)).unwrap().cast::<f64>();
    let sample = &small_samples(&store)[0];
    let mut scored: Vec<(f64, String)> = sample
        .candidate_ids
        .iter()
        .map(|id| (logit(&store, &sample.query_id, id, &params), id.clone()))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    // Highest logit acts as the positive, the lowest is pushed past the margin.
    let (top, mid, low) = (&scored[0], &scored[scored.len() / 2], &scored[scored.len() - 1]);
    let (gap_mid, gap_low) = (top.0 - mid.0, top.0 - low.0);
    assert!(gap_low > gap_mid);
    let margin = 0.5 * (gap_mid + gap_low);

    let three = TrainingSample {
        query_id: sample.query_id.clone(),
        candidate_ids: vec![top.1.clone(), mid.1.clone(), low.1.clone()],
        positive_index: 0,
    };
    let two = TrainingSample {
        candidate_ids: vec![top.1.clone(), mid.1.clone()],
        ..three.clone()
    };
    let (loss3, g3) = loss_and_gradients(&three, &store, &params, margin, LossOn::Logits).unwrap();
    let (loss2, g2) = loss_and_gradients(&two, &store, &params, margin, LossOn::Logits).unwrap();
    // Same active hinge, averaged over two negatives instead of one.
    assert!((loss3 - 0.5 * loss2).abs() < 1e-12);
    for ((name, _, a), (_, _, b)) in g3.tensors().into_iter().zip(g2.tensors()) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - 0.5 * y).abs() <= 1e-12 * (1.0 + y.abs()), "{name}");
        }
    }
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let store = small_store(5);
    let samples = small_samples(&store);
    let init = init_params(&small_config(&store)).unwrap();
    for optimizer in [OptimizerKind::Sgd, OptimizerKind::Adam] {
        let cfg = TrainConfig {
            lr: 0.0,
            optimizer,
            ..quick_train_config()
        };
        let (params, _) = train(&samples, &store, init.clone(), &cfg).unwrap();
        assert_eq!(params.digest(), init.digest());
    }
}

#[test]
fn training_is_deterministic_and_order_invariant() {
    let store = small_store(6);
    let samples = small_samples(&store);
    let init = init_params(&small_config(&store)).unwrap();
    let cfg = quick_train_config();
    let (a, ra) = train(&samples, &store, init.clone(), &cfg).unwrap();
    let (b, rb) = train(&samples, &store, init.clone(), &cfg).unwrap();
    assert_eq!(a.digest(), b.digest());
    assert_eq!(ra.without_timings(), rb.without_timings());
    assert_ne!(a.digest(), init.digest());

    let mut reversed = samples.clone();
    reversed.reverse();
    let (c, rc) = train(&reversed, &store, init, &cfg).unwrap();
    assert_eq!(a.digest(), c.digest());
    assert_eq!(ra.without_timings(), rc.without_timings());
}

#[test]
fn non_finite_loss_is_located() {
    let store = small_store(7);
    let samples = small_samples(&store);
    let mut init = init_params(&small_config(&store)).unwrap();
    init.score_bias = f32::NAN;
    let err = train(&samples, &store, init, &quick_train_config()).unwrap_err();
    match err {
        TrainError::NonFiniteLoss { epoch, batch, first_query } => {
            assert_eq!((epoch, batch), (1, 1));
            assert!(store.query(&first_query).is_some());
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn checkpoints_are_written_each_epoch() {
    let store = small_store(8);
    let samples = small_samples(&store);
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainConfig {
        checkpoint_dir: Some(dir.path().to_path_buf()),
        ..quick_train_config()
    };
    let (params, _) = train(&samples, &store, init_params(&small_config(&store)).unwrap(), &cfg).unwrap();
    let last = RerankerParams::load(&dir.path().join("epoch_003.gvck")).unwrap();
    assert_eq!(last.digest(), params.digest());
    assert!(dir.path().join("epoch_001.gvck").exists());
}

fn full_store() -> GeoStore {
    let cfg = SynthConfig {
        label_semi_positives: true,
        ..SynthConfig::default()
    };
    generate_synthetic(&cfg, 7).unwrap()
}

#[test]
fn synthetic_text_separates_locations() {
    let store = full_store();
    let refs = store.references();
    let mut correct = 0;
    for q in store.queries() {
        let qt = q.text.as_ref().unwrap().values();
        let best = refs
            .iter()
            .map(|r| {
                let s = cosine_with(qt, r.text.as_ref().unwrap().values(), Accumulation::F64).unwrap();
                (s, &r.id)
            })
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap();
        correct += usize::from(q.ground_truth.contains(best.1));
    }
    let acc = correct as f64 / store.queries().len() as f64;
    assert!(acc >= 0.99, "nearest text accuracy {acc}");
}

#[test]
fn synthetic_images_confuse_within_group() {
    let store = full_store();
    assert!(store.queries().len() >= 1000);
    let rankings = retrieve_all(&store, 10, Accumulation::F64).unwrap();
    let gt = store.ground_truth();
    let r1 = recall_at_k(&rankings, &gt, 1).unwrap();
    assert!((0.25..=0.40).contains(&r1), "baseline R@1 {r1}");
    // The top hit nearly always lands in the right confusion group.
    let mut in_group = 0;
    for r in &rankings {
        let q = store.query(&r.query_id).unwrap();
        let group: BTreeSet<&String> = q.ground_truth.iter().chain(&q.semi_positives).collect();
        in_group += usize::from(group.contains(&r.entries[0].reference_id));
    }
    let frac = in_group as f64 / rankings.len() as f64;
    assert!(frac >= 0.95, "top-1 in group {frac}");
}
