use crate::geostore::{GeoStore, QueryRecord};
use crate::retriever::{rank_order, RankEntry, Ranking};

use super::params::{dot, Real, RerankerParams};
use super::RerankError;

/// Which side of a pair a record sits on. Only matters when projections are
/// not shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Query,
    Reference,
}

/// Image and text embeddings of one record, already in the network's
/// precision.
#[derive(Debug, Clone, Copy)]
pub struct PairInput<'a, T> {
    pub image: &'a [T],
    pub text: &'a [T],
}

/// Intermediate values of one aligner block, kept for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTrace<T> {
    pub input: Vec<T>,
    /// Normalized pre-activation `(a - mean) * inv_std`.
    pub normalized: Vec<T>,
    pub inv_std: T,
    /// `scale * normalized + shift`, before ReLU.
    pub affine: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignTrace<T> {
    pub blocks: Vec<BlockTrace<T>>,
    pub output: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairScoreTrace<T> {
    pub fused_query: Vec<T>,
    pub fused_ref: Vec<T>,
    pub aligned_query: Vec<T>,
    pub aligned_ref: Vec<T>,
    pub logit: T,
    pub score: T,
}

fn check(what: &str, expected: usize, found: usize) -> Result<(), RerankError> {
    if expected == found {
        Ok(())
    } else {
        Err(RerankError::ShapeMismatch {
            what: what.into(),
            expected,
            found,
        })
    }
}

/// `P_img(image) + P_txt(text)`.
pub fn project_fuse<T: Real>(
    input: PairInput<'_, T>,
    params: &RerankerParams<T>,
    side: Side,
) -> Result<Vec<T>, RerankError> {
    check("image embedding", params.config.image_dim, input.image.len())?;
    check("text embedding", params.config.text_dim, input.text.len())?;
    let (img, txt) = match (side, &params.ref_img_proj, &params.ref_txt_proj) {
        (Side::Reference, Some(i), Some(t)) => (i, t),
        _ => (&params.img_proj, &params.txt_proj),
    };
    let mut fused = img.forward(input.image);
    for (f, t) in fused.iter_mut().zip(txt.forward(input.text)) {
        *f += t;
    }
    Ok(fused)
}

/// Runs the aligner stack, keeping every intermediate.
pub fn align_traced<T: Real>(
    fused: &[T],
    params: &RerankerParams<T>,
) -> Result<AlignTrace<T>, RerankError> {
    check("fused vector", params.config.latent_dim, fused.len())?;
    let eps = T::lit(params.config.ln_epsilon);
    let mut x = fused.to_vec();
    let mut blocks = Vec::with_capacity(params.aligner.len());
    for block in &params.aligner {
        let a = block.linear.forward(&x);
        let n = T::lit(a.len() as f64);
        let mean = a.iter().copied().sum::<T>() / n;
        let var = a.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let inv_std = T::one() / (var + eps).sqrt();
        let normalized: Vec<T> = a.iter().map(|&v| (v - mean) * inv_std).collect();
        let affine: Vec<T> = normalized
            .iter()
            .zip(&block.ln_scale)
            .zip(&block.ln_shift)
            .map(|((&z, &g), &b)| g * z + b)
            .collect();
        let out = affine.iter().map(|&v| v.max(T::zero())).collect();
        blocks.push(BlockTrace {
            input: std::mem::replace(&mut x, out),
            normalized,
            inv_std,
            affine,
        });
    }
    Ok(AlignTrace { blocks, output: x })
}

/// `[Linear -> LayerNorm -> ReLU]` repeated `aligner_layers` times.
pub fn align<T: Real>(fused: &[T], params: &RerankerParams<T>) -> Result<Vec<T>, RerankError> {
    align_traced(fused, params).map(|t| t.output)
}

/// Logistic function, clamped so the result is strictly inside (0, 1) even
/// where the exact value rounds to an endpoint. NaN passes through so the
/// trainer can report it.
pub fn sigmoid<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    let s = if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    };
    s.max(T::min_positive_value()).min(T::one() - T::epsilon())
}

/// `W u`, the query side mapped into the reference side's space.
pub fn apply_score_weight<T: Real>(params: &RerankerParams<T>, u: &[T]) -> Vec<T> {
    let h = params.config.latent_dim;
    params.score_weight.chunks_exact(h).map(|row| dot(row, u)).collect()
}

/// Aligned latent vector for one record.
pub fn encode_side<T: Real>(
    input: PairInput<'_, T>,
    params: &RerankerParams<T>,
    side: Side,
) -> Result<Vec<T>, RerankError> {
    align(&project_fuse(input, params, side)?, params)
}

pub fn score_pair_traced<T: Real>(
    query: PairInput<'_, T>,
    reference: PairInput<'_, T>,
    params: &RerankerParams<T>,
) -> Result<PairScoreTrace<T>, RerankError> {
    let fused_query = project_fuse(query, params, Side::Query)?;
    let fused_ref = project_fuse(reference, params, Side::Reference)?;
    let aligned_query = align(&fused_query, params)?;
    let aligned_ref = align(&fused_ref, params)?;
    let logit = dot(&apply_score_weight(params, &aligned_query), &aligned_ref) + params.score_bias;
    Ok(PairScoreTrace {
        fused_query,
        fused_ref,
        aligned_query,
        aligned_ref,
        logit,
        score: sigmoid(logit),
    })
}

/// Probability-like score in (0, 1) that `reference` matches `query`.
pub fn score_pair<T: Real>(
    query: PairInput<'_, T>,
    reference: PairInput<'_, T>,
    params: &RerankerParams<T>,
) -> Result<T, RerankError> {
    score_pair_traced(query, reference, params).map(|t| t.score)
}

pub fn to_real<T: Real>(v: &[f32]) -> Vec<T> {
    v.iter().map(|&x| T::from_f32(x).expect("finite")).collect()
}

/// Reorders `ranking` by reranker score (descending, ties by ascending id).
/// The candidate set is left untouched.
pub fn rerank<T: Real>(
    query: &QueryRecord,
    ranking: &Ranking,
    store: &GeoStore,
    params: &RerankerParams<T>,
) -> Result<Ranking, RerankError> {
    let q_text = query.text.as_ref().ok_or_else(|| RerankError::MissingText {
        id: query.id.clone(),
    })?;
    let q_image: Vec<T> = to_real(query.image.values());
    let q_text: Vec<T> = to_real(q_text.values());
    let u = encode_side(
        PairInput {
            image: &q_image,
            text: &q_text,
        },
        params,
        Side::Query,
    )?;
    let wu = apply_score_weight(params, &u);

    let mut entries = Vec::with_capacity(ranking.entries.len());
    for entry in &ranking.entries {
        let id = &entry.reference_id;
        let r = store.reference(id).ok_or_else(|| RerankError::UnknownId {
            kind: "reference",
            id: id.clone(),
        })?;
        let r_text = r
            .text
            .as_ref()
            .ok_or_else(|| RerankError::MissingText { id: id.clone() })?;
        let r_image: Vec<T> = to_real(r.image.values());
        let r_text: Vec<T> = to_real(r_text.values());
        let v = encode_side(
            PairInput {
                image: &r_image,
                text: &r_text,
            },
            params,
            Side::Reference,
        )?;
        let score = sigmoid(dot(&wu, &v) + params.score_bias);
        entries.push(RankEntry {
            reference_id: id.clone(),
            score: score.to_f64_lossy(),
        });
    }
    entries.sort_by(rank_order);
    Ok(Ranking {
        query_id: ranking.query_id.clone(),
        k: ranking.k,
        entries,
        reranked: true,
    })
}
