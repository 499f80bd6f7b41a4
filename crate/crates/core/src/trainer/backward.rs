//! Forward pass over one training sample and its hand-derived gradient.
//!
//! With `d_c = dL/dlogit_c` for every candidate `c`, `u` the aligned query
//! vector and `v_c` the aligned candidate vectors:
//!
//! ```text
//! dL/db   = sum_c d_c
//! dL/dW   = (sum_c d_c v_c) u^T
//! dL/du   = W^T (sum_c d_c v_c)
//! dL/dv_c = d_c W u
//! ```
//!
//! Each aligned vector is then pushed back through ReLU, LayerNorm, the
//! aligner linears and the projections of its side. Candidates with
//! `d_c == 0` are skipped entirely, so they contribute exactly nothing.

use crate::geostore::GeoStore;
use crate::reranker::{
    align_traced, apply_score_weight, project_fuse, sigmoid, to_real, AlignTrace, PairInput, Real,
    RerankError, RerankerParams, Side,
};

use super::loss::{margin_loss, margin_loss_gradient};
use super::{LossOn, TrainError, TrainingSample};

struct SideData<T> {
    image: Vec<T>,
    text: Vec<T>,
}

fn side_data<T: Real>(
    id: &str,
    image: &[f32],
    text: Option<&crate::geostore::Embedding>,
) -> Result<SideData<T>, RerankError> {
    let text = text.ok_or_else(|| RerankError::MissingText { id: id.to_string() })?;
    Ok(SideData {
        image: to_real(image),
        text: to_real(text.values()),
    })
}

fn gather<T: Real>(
    sample: &TrainingSample,
    store: &GeoStore,
) -> Result<(SideData<T>, Vec<SideData<T>>), TrainError> {
    sample.check()?;
    let q = store
        .query(&sample.query_id)
        .ok_or_else(|| TrainError::UnknownQuery(sample.query_id.clone()))?;
    let query = side_data(&q.id, q.image.values(), q.text.as_ref())?;
    let mut cands = Vec::with_capacity(sample.candidate_ids.len());
    for id in &sample.candidate_ids {
        let r = store.reference(id).ok_or_else(|| RerankError::UnknownId {
            kind: "reference",
            id: id.clone(),
        })?;
        cands.push(side_data(id, r.image.values(), r.text.as_ref())?);
    }
    Ok((query, cands))
}

struct SideForward<T> {
    input: SideData<T>,
    trace: AlignTrace<T>,
}

fn forward_side<T: Real>(
    input: SideData<T>,
    params: &RerankerParams<T>,
    side: Side,
) -> Result<SideForward<T>, RerankError> {
    let fused = project_fuse(
        PairInput {
            image: &input.image,
            text: &input.text,
        },
        params,
        side,
    )?;
    let trace = align_traced(&fused, params)?;
    Ok(SideForward { input, trace })
}

struct Forward<T> {
    query: SideForward<T>,
    cands: Vec<SideForward<T>>,
    wu: Vec<T>,
    logits: Vec<T>,
}

fn forward<T: Real>(
    sample: &TrainingSample,
    store: &GeoStore,
    params: &RerankerParams<T>,
) -> Result<Forward<T>, TrainError> {
    let (q, cs) = gather::<T>(sample, store)?;
    let query = forward_side(q, params, Side::Query)?;
    let wu = apply_score_weight(params, &query.trace.output);
    let cands = cs
        .into_iter()
        .map(|c| forward_side(c, params, Side::Reference))
        .collect::<Result<Vec<_>, _>>()?;
    let logits = cands
        .iter()
        .map(|c| crate::reranker::dot(&wu, &c.trace.output) + params.score_bias)
        .collect();
    Ok(Forward {
        query,
        cands,
        wu,
        logits,
    })
}

fn hinge_inputs<T: Real>(logits: &[T], loss_on: LossOn) -> Vec<f64> {
    logits
        .iter()
        .map(|&x| match loss_on {
            LossOn::Scores => sigmoid(x).to_f64_lossy(),
            LossOn::Logits => x.to_f64_lossy(),
        })
        .collect()
}

fn split_pos(values: &[f64], pos: usize) -> (f64, Vec<f64>) {
    let negs = values
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != pos)
        .map(|(_, &v)| v)
        .collect();
    (values[pos], negs)
}

/// Loss of one sample, without gradients.
pub fn sample_loss<T: Real>(
    sample: &TrainingSample,
    store: &GeoStore,
    params: &RerankerParams<T>,
    margin: f64,
    loss_on: LossOn,
) -> Result<f64, TrainError> {
    let fwd = forward(sample, store, params)?;
    let (pos, negs) = split_pos(&hinge_inputs(&fwd.logits, loss_on), sample.positive_index);
    margin_loss(pos, &negs, margin)
}

/// Pushes `g_out` (gradient w.r.t. the aligner output) back through the
/// aligner, accumulating into `grads`. Returns the gradient w.r.t. the fused
/// vector.
fn backward_align<T: Real>(
    trace: &AlignTrace<T>,
    mut g: Vec<T>,
    params: &RerankerParams<T>,
    grads: &mut RerankerParams<T>,
) -> Vec<T> {
    for (l, bt) in trace.blocks.iter().enumerate().rev() {
        let block = &params.aligner[l];
        let gblock = &mut grads.aligner[l];
        let n = T::lit(g.len() as f64);
        // ReLU, then the LayerNorm affine.
        let mut g_hat = Vec::with_capacity(g.len());
        for (j, &gj) in g.iter().enumerate() {
            let gy = if bt.affine[j] > T::zero() { gj } else { T::zero() };
            gblock.ln_scale[j] += gy * bt.normalized[j];
            gblock.ln_shift[j] += gy;
            g_hat.push(gy * block.ln_scale[j]);
        }
        // Normalization: g_a = inv_std * (g_hat - mean(g_hat) - x_hat * mean(g_hat * x_hat)).
        let mean_g = g_hat.iter().copied().sum::<T>() / n;
        let mean_gx = g_hat
            .iter()
            .zip(&bt.normalized)
            .map(|(&a, &b)| a * b)
            .sum::<T>()
            / n;
        let g_a: Vec<T> = g_hat
            .iter()
            .zip(&bt.normalized)
            .map(|(&gh, &xh)| bt.inv_std * (gh - mean_g - xh * mean_gx))
            .collect();
        gblock.linear.accumulate_grad(&g_a, &bt.input);
        g = block.linear.backward_input(&g_a);
    }
    g
}

fn backward_side<T: Real>(
    side: &SideForward<T>,
    g_out: Vec<T>,
    kind: Side,
    params: &RerankerParams<T>,
    grads: &mut RerankerParams<T>,
) {
    let g_fused = backward_align(&side.trace, g_out, params, grads);
    let separate = grads.ref_img_proj.is_some();
    let (gi, gt) = match kind {
        Side::Reference if separate => (
            grads.ref_img_proj.as_mut().expect("separate"),
            grads.ref_txt_proj.as_mut().expect("separate"),
        ),
        _ => (&mut grads.img_proj, &mut grads.txt_proj),
    };
    gi.accumulate_grad(&g_fused, &side.input.image);
    gt.accumulate_grad(&g_fused, &side.input.text);
}

/// Loss of one sample and the gradient of that loss with respect to every
/// parameter tensor (shaped like `params`).
pub fn loss_and_gradients<T: Real>(
    sample: &TrainingSample,
    store: &GeoStore,
    params: &RerankerParams<T>,
    margin: f64,
    loss_on: LossOn,
) -> Result<(f64, RerankerParams<T>), TrainError> {
    let fwd = forward(sample, store, params)?;
    let values = hinge_inputs(&fwd.logits, loss_on);
    let p = sample.positive_index;
    let (pos, negs) = split_pos(&values, p);
    let loss = margin_loss(pos, &negs, margin)?;
    let (d_pos, d_negs) = margin_loss_gradient(pos, &negs, margin)?;

    let mut d_values = d_negs;
    d_values.insert(p, d_pos);
    // Chain through the sigmoid when the hinge sees scores.
    let d_logits: Vec<T> = d_values
        .iter()
        .zip(&fwd.logits)
        .map(|(&d, &x)| {
            let d = T::lit(d);
            match loss_on {
                LossOn::Scores => d * sigmoid(x) * sigmoid(-x),
                LossOn::Logits => d,
            }
        })
        .collect();

    let mut grads = params.zeros_like();
    let h = params.config.latent_dim;
    let mut z = vec![T::zero(); h];
    for (c, &d) in fwd.cands.iter().zip(&d_logits) {
        if d == T::zero() {
            continue;
        }
        grads.score_bias += d;
        for (zi, &vi) in z.iter_mut().zip(&c.trace.output) {
            *zi += d * vi;
        }
    }
    let u = &fwd.query.trace.output;
    for (row, &zi) in grads.score_weight.chunks_exact_mut(h).zip(&z) {
        for (w, &uj) in row.iter_mut().zip(u) {
            *w += zi * uj;
        }
    }
    // dL/du = W^T z.
    let mut g_u = vec![T::zero(); h];
    for (row, &zi) in params.score_weight.chunks_exact(h).zip(&z) {
        for (g, &w) in g_u.iter_mut().zip(row) {
            *g += zi * w;
        }
    }
    backward_side(&fwd.query, g_u, Side::Query, params, &mut grads);
    for (c, &d) in fwd.cands.iter().zip(&d_logits) {
        if d == T::zero() {
            continue;
        }
        let g_v: Vec<T> = fwd.wu.iter().map(|&w| d * w).collect();
        backward_side(c, g_v, Side::Reference, params, &mut grads);
    }
    Ok((loss, grads))
}
