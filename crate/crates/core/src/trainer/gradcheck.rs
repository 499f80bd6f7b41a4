//! Central finite-difference check of [`loss_and_gradients`] in 64-bit.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::geostore::{Embedding, GeoStore, QueryRecord, ReferenceRecord};
use crate::reranker::{init_params, RerankerConfig, RerankerParams};

use super::backward::{loss_and_gradients, sample_loss};
use super::{LossOn, TrainError, TrainingSample};

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
const FD_STEP: f64 = 1e-4;

/// `||a - n|| / (||a|| + ||n||)`, zero when both vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n) * (a - n))
        .sum::<f64>()
        .sqrt();
    let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn: f64 = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    if na + nn == 0.0 {
        0.0
    } else {
        diff / (na + nn)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub seed: u64,
    pub loss: f64,
    /// `(tensor name, relative error)` in canonical tensor order.
    pub per_tensor: Vec<(String, f64)>,
    pub max_relative_error: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error <= GRADCHECK_TOLERANCE
    }
}

/// Per-tensor relative error between analytic and central-difference
/// gradients for one sample.
pub fn gradcheck_sample(
    sample: &TrainingSample,
    store: &GeoStore,
    params: &RerankerParams<f64>,
    margin: f64,
    loss_on: LossOn,
) -> Result<(f64, Vec<(String, f64)>), TrainError> {
    let (loss, grads) = loss_and_gradients(sample, store, params, margin, loss_on)?;
    let analytic: Vec<(String, Vec<f64>)> = grads
        .tensors()
        .into_iter()
        .map(|(n, _, d)| (n, d.to_vec()))
        .collect();
    let mut probe = params.clone();
    let mut out = Vec::with_capacity(analytic.len());
    for (t, (name, a)) in analytic.iter().enumerate() {
        let mut numeric = Vec::with_capacity(a.len());
        for i in 0..a.len() {
            let orig = params.tensors()[t].2[i];
            probe.tensors_mut()[t].1[i] = orig + FD_STEP;
            let up = sample_loss(sample, store, &probe, margin, loss_on)?;
            probe.tensors_mut()[t].1[i] = orig - FD_STEP;
            let down = sample_loss(sample, store, &probe, margin, loss_on)?;
            probe.tensors_mut()[t].1[i] = orig;
            numeric.push((up - down) / (2.0 * FD_STEP));
        }
        out.push((name.clone(), relative_error(a, &numeric)));
    }
    Ok((loss, out))
}

fn unit(rng: &mut ChaCha8Rng, n: usize) -> Embedding {
    let v: Vec<f32> = (0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    Embedding::new(v.iter().map(|x| x / norm).collect()).expect("finite")
}

/// Random small problem: store, one sample, and parameters with every
/// tensor perturbed away from its initial value.
pub fn random_problem(
    seed: u64,
) -> Result<(GeoStore, TrainingSample, RerankerParams<f64>), TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (image_dim, text_dim) = (5, 4);
    let n_cands = 5;
    let config = RerankerConfig {
        image_dim,
        text_dim,
        latent_dim: 4,
        aligner_layers: 2,
        aligner_hidden: 3,
        shared_projections: seed.is_multiple_of(2),
        init_seed: seed,
        ..RerankerConfig::default()
    };
    let mut params = init_params(&config)?.cast::<f64>();
    for (_, t) in params.tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.random_range(-0.5..0.5);
        }
    }
    let refs: Vec<ReferenceRecord> = (0..n_cands)
        .map(|i| ReferenceRecord {
            id: format!("r{i}"),
            image: unit(&mut rng, image_dim),
            text: Some(unit(&mut rng, text_dim)),
            caption: None,
            coord: None,
        })
        .collect();
    let positive = rng.random_range(0..n_cands);
    let query = QueryRecord {
        id: "q".into(),
        image: unit(&mut rng, image_dim),
        text: Some(unit(&mut rng, text_dim)),
        caption: None,
        coord: None,
        ground_truth: BTreeSet::from([format!("r{positive}")]),
        semi_positives: BTreeSet::new(),
    };
    let store = GeoStore::new(image_dim, text_dim, refs, vec![query])
        .map_err(|e| TrainError::BadSample {
            query_id: "q".into(),
            message: e.to_string(),
        })?;
    let sample = TrainingSample {
        query_id: "q".into(),
        candidate_ids: (0..n_cands).map(|i| format!("r{i}")).collect(),
        positive_index: positive,
    };
    Ok((store, sample, params))
}

/// Finite-difference check of the full loss on a random problem built from
/// `seed`, with the hinge on sigmoid scores and margin 1.
pub fn gradcheck(seed: u64) -> Result<GradCheckReport, TrainError> {
    let (store, sample, params) = random_problem(seed)?;
    let (loss, per_tensor) = gradcheck_sample(&sample, &store, &params, 1.0, LossOn::Scores)?;
    let max_relative_error = per_tensor.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    Ok(GradCheckReport {
        seed,
        loss,
        per_tensor,
        max_relative_error,
    })
}
