use std::path::Path;

use crate::reranker::{CheckpointFile, NamedTensor, Real, RerankError, RerankerParams};

use super::{OptimizerKind, TrainConfig, TrainError};

/// Adam moments and step count. Empty for SGD.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub kind: OptimizerKind,
    pub step: u64,
    pub m: Option<RerankerParams<T>>,
    pub v: Option<RerankerParams<T>>,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(kind: OptimizerKind, params: &RerankerParams<T>) -> Self {
        let moments = (kind == OptimizerKind::Adam).then(|| params.zeros_like());
        Self {
            kind,
            step: 0,
            m: moments.clone(),
            v: moments,
        }
    }
}

/// Rescales `grads` in place to global L2 norm at most `max_norm`. Returns
/// the norm before clipping.
pub fn clip_gradients<T: Real>(grads: &mut RerankerParams<T>, max_norm: f64) -> f64 {
    let norm = grads.l2_norm();
    if norm > max_norm {
        grads.scale(T::lit(max_norm / norm));
    }
    norm
}

/// One update. SGD: `theta -= lr * g`. Adam: bias-corrected first and
/// second moments, `theta -= lr * m_hat / (sqrt(v_hat) + eps)`.
pub fn optimizer_step<T: Real>(
    params: &mut RerankerParams<T>,
    grads: &RerankerParams<T>,
    state: &mut OptimizerState<T>,
    config: &TrainConfig,
) -> Result<(), TrainError> {
    if !params.same_shapes(grads) {
        return Err(TrainError::ShapeMismatch);
    }
    let lr = T::lit(config.lr);
    state.step += 1;
    match state.kind {
        OptimizerKind::Sgd => {
            params.add_scaled(grads, -lr);
        }
        OptimizerKind::Adam => {
            let (m, v) = match (&mut state.m, &mut state.v) {
                (Some(m), Some(v)) if m.same_shapes(grads) && v.same_shapes(grads) => (m, v),
                _ => return Err(TrainError::ShapeMismatch),
            };
            let b1 = T::lit(config.adam_beta1);
            let b2 = T::lit(config.adam_beta2);
            let eps = T::lit(config.adam_eps);
            let t = i32::try_from(state.step).unwrap_or(i32::MAX);
            let c1 = T::one() - b1.powi(t);
            let c2 = T::one() - b2.powi(t);
            let g_all = grads.tensors();
            let m_all = m.tensors_mut();
            let v_all = v.tensors_mut();
            for ((((_, p), (_, _, g)), (_, m)), (_, v)) in
                params.tensors_mut().into_iter().zip(g_all).zip(m_all).zip(v_all)
            {
                for i in 0..p.len() {
                    m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                    v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
    Ok(())
}

const OPTIM_KIND: &str = "optim.kind";
const OPTIM_STEP: &str = "optim.step";

/// Parameters plus optimizer state in one checkpoint. Moments are stored as
/// extra tensors `optim.m.<name>` and `optim.v.<name>`.
pub fn save_training_checkpoint(
    path: &Path,
    params: &RerankerParams<f32>,
    state: &OptimizerState<f32>,
) -> Result<(), TrainError> {
    let mut file = params.to_checkpoint();
    file.meta.insert(OPTIM_KIND.into(), state.kind.to_string());
    file.meta.insert(OPTIM_STEP.into(), state.step.to_string());
    for (prefix, moments) in [("optim.m.", &state.m), ("optim.v.", &state.v)] {
        if let Some(p) = moments {
            for (name, shape, data) in p.tensors() {
                file.tensors.push(NamedTensor {
                    name: format!("{prefix}{name}"),
                    shape,
                    data: data.to_vec(),
                });
            }
        }
    }
    file.write(path).map_err(|e| TrainError::Rerank(e.into()))
}

pub fn load_training_checkpoint(
    path: &Path,
) -> Result<(RerankerParams<f32>, OptimizerState<f32>), TrainError> {
    let file = CheckpointFile::read(path).map_err(RerankError::from)?;
    let params = RerankerParams::from_checkpoint(&file)?;
    let bad = |m: &str| TrainError::Rerank(RerankError::Config(m.to_string()));
    let kind: OptimizerKind = file
        .meta
        .get(OPTIM_KIND)
        .ok_or_else(|| bad("checkpoint has no optimizer state"))?
        .parse()
        .map_err(|e: String| bad(&e))?;
    let step = file
        .meta
        .get(OPTIM_STEP)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("bad optim.step"))?;
    let mut state = OptimizerState::new(kind, &params);
    for (prefix, moments) in [("optim.m.", &mut state.m), ("optim.v.", &mut state.v)] {
        if let Some(p) = moments {
            for (name, dst) in p.tensors_mut() {
                let t = file
                    .tensor(&format!("{prefix}{name}"))
                    .ok_or_else(|| bad(&format!("missing {prefix}{name}")))?;
                if t.data.len() != dst.len() {
                    return Err(TrainError::ShapeMismatch);
                }
                dst.copy_from_slice(&t.data);
            }
        }
    }
    state.step = step;
    Ok((params, state))
}
