use std::fs;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geostore::GeoStore;
use crate::reranker::{encode_side, sigmoid, to_real, apply_score_weight, dot, PairInput, RerankError, RerankerParams, Side};

use super::backward::loss_and_gradients;
use super::optim::{clip_gradients, optimizer_step, save_training_checkpoint, OptimizerState};
use super::{TrainConfig, TrainError, TrainingSample};

// Keeps the validation split independent of the epoch shuffles.
const SPLIT_SALT: u64 = 0x7a11_da7e_5917;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Recall among each held-out sample's candidates after reranking.
    pub val_r1: Option<f64>,
    pub val_r5: Option<f64>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_count: usize,
    pub val_query_ids: Vec<String>,
    pub epochs: Vec<EpochRecord>,
}

impl TrainReport {
    /// The report with wall-clock times zeroed, for reproducibility checks.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for e in &mut r.epochs {
            e.wall_ms = 0;
        }
        r
    }

    /// One JSON object per epoch.
    pub fn epochs_jsonl(&self) -> String {
        crate::jsonl::to_string(&self.epochs)
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("epoch,mean_loss,val_r1,val_r5,wall_ms\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.epoch,
                e.mean_loss,
                opt(e.val_r1),
                opt(e.val_r5),
                e.wall_ms
            ));
        }
        out
    }
}

/// 1-based rank of the positive after scoring the sample's candidates.
fn positive_rank(
    sample: &TrainingSample,
    store: &GeoStore,
    params: &RerankerParams<f32>,
) -> Result<usize, TrainError> {
    let q = store
        .query(&sample.query_id)
        .ok_or_else(|| TrainError::UnknownQuery(sample.query_id.clone()))?;
    let side = |id: &str, image: &[f32], text: Option<&crate::geostore::Embedding>, s: Side| {
        let text = text.ok_or_else(|| RerankError::MissingText { id: id.to_string() })?;
        let (i, t): (Vec<f32>, Vec<f32>) = (to_real(image), to_real(text.values()));
        encode_side(PairInput { image: &i, text: &t }, params, s)
    };
    let u = side(&q.id, q.image.values(), q.text.as_ref(), Side::Query)?;
    let wu = apply_score_weight(params, &u);
    let mut scores = Vec::with_capacity(sample.candidate_ids.len());
    for id in &sample.candidate_ids {
        let r = store.reference(id).ok_or_else(|| RerankError::UnknownId {
            kind: "reference",
            id: id.clone(),
        })?;
        let v = side(id, r.image.values(), r.text.as_ref(), Side::Reference)?;
        scores.push(sigmoid(dot(&wu, &v) + params.score_bias));
    }
    let pos_score = scores[sample.positive_index];
    let pos_id = sample.positive_id();
    // Same order as reranking: score descending, then id ascending.
    let ahead = scores
        .iter()
        .zip(&sample.candidate_ids)
        .filter(|(s, id)| **s > pos_score || (**s == pos_score && id.as_str() < pos_id))
        .count();
    Ok(ahead + 1)
}

fn validate_samples(
    val: &[&TrainingSample],
    store: &GeoStore,
    params: &RerankerParams<f32>,
) -> Result<(Option<f64>, Option<f64>), TrainError> {
    if val.is_empty() {
        return Ok((None, None));
    }
    let ranks = val
        .par_iter()
        .map(|s| positive_rank(s, store, params))
        .collect::<Result<Vec<_>, _>>()?;
    let n = ranks.len() as f64;
    let at = |k: usize| ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
    Ok((Some(at(1)), Some(at(5))))
}

/// Mini-batch training from `init`. Samples are put in canonical order
/// first, a seeded split holds out `val_split` of them, and each epoch
/// visits the rest in a seeded shuffle. The batch gradient is the mean of
/// per-sample gradients summed in canonical order, so it does not depend on
/// scheduling or on the order samples were supplied in.
pub fn train(
    samples: &[TrainingSample],
    store: &GeoStore,
    init: RerankerParams<f32>,
    config: &TrainConfig,
) -> Result<(RerankerParams<f32>, TrainReport), TrainError> {
    config.validate()?;
    if samples.is_empty() {
        return Err(TrainError::NoSamples);
    }
    for s in samples {
        s.check()?;
    }
    let mut ordered: Vec<&TrainingSample> = samples.iter().collect();
    ordered.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));

    let mut split_rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed ^ SPLIT_SALT);
    let mut perm: Vec<usize> = (0..ordered.len()).collect();
    perm.shuffle(&mut split_rng);
    let mut n_val = (config.val_split * ordered.len() as f64).round() as usize;
    if config.val_split > 0.0 {
        n_val = n_val.clamp(1, ordered.len().saturating_sub(1));
    }
    let mut val_idx: Vec<usize> = perm[..n_val].to_vec();
    val_idx.sort_unstable();
    let mut train_idx: Vec<usize> = perm[n_val..].to_vec();
    train_idx.sort_unstable();
    if train_idx.is_empty() {
        return Err(TrainError::NoSamples);
    }
    let val: Vec<&TrainingSample> = val_idx.iter().map(|&i| ordered[i]).collect();
    let mut val_query_ids: Vec<String> = val.iter().map(|s| s.query_id.clone()).collect();
    val_query_ids.dedup();

    if let Some(dir) = &config.checkpoint_dir {
        fs::create_dir_all(dir).map_err(|source| TrainError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }

    let mut params = init;
    let mut state = OptimizerState::new(config.optimizer, &params);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let start = Instant::now();
        let mut order = train_idx.clone();
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut batch: Vec<&TrainingSample> = chunk.iter().map(|&i| ordered[i]).collect();
            batch.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
            let results = batch
                .par_iter()
                .map(|s| loss_and_gradients(s, store, &params, config.margin, config.loss_on))
                .collect::<Result<Vec<_>, _>>()?;
            let mut grads = params.zeros_like();
            let mut batch_loss = 0.0;
            for (loss, g) in &results {
                batch_loss += loss;
                grads.add_scaled(g, 1.0);
            }
            if !batch_loss.is_finite() || !grads.all_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: b + 1,
                    first_query: batch[0].query_id.clone(),
                });
            }
            loss_sum += batch_loss;
            grads.scale(1.0 / batch.len() as f32);
            if let Some(c) = config.grad_clip {
                clip_gradients(&mut grads, c);
            }
            optimizer_step(&mut params, &grads, &mut state, config)?;
        }
        let (val_r1, val_r5) = validate_samples(&val, store, &params)?;
        if let Some(dir) = &config.checkpoint_dir {
            save_training_checkpoint(&dir.join(format!("epoch_{epoch:03}.gvck")), &params, &state)?;
        }
        epochs.push(EpochRecord {
            epoch,
            mean_loss: loss_sum / train_idx.len() as f64,
            val_r1,
            val_r5,
            wall_ms: start.elapsed().as_millis() as u64,
        });
    }
    Ok((
        params,
        TrainReport {
            train_count: train_idx.len(),
            val_query_ids,
            epochs,
        },
    ))
}
