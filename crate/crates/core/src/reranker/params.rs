use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{RerankError, RerankerConfig};

/// Floating-point type the network runs in.
pub trait Real:
    Float + FromPrimitive + Sum + AddAssign + SubAssign + MulAssign + Debug + Send + Sync + 'static
{
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("real")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `y = W x + b` with `W` stored row-major as `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Linear<T> {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![T::zero(); in_dim * out_dim],
            bias: vec![T::zero(); out_dim],
        }
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.in_dim);
        self.weight
            .chunks_exact(self.in_dim)
            .zip(&self.bias)
            .map(|(row, &b)| dot(row, x) + b)
            .collect()
    }

    /// `W^T g`.
    pub fn backward_input(&self, g: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.in_dim];
        for (row, &gi) in self.weight.chunks_exact(self.in_dim).zip(g) {
            if gi == T::zero() {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(row) {
                *o += gi * w;
            }
        }
        out
    }

    /// Accumulates `dW += g x^T`, `db += g`.
    pub fn accumulate_grad(&mut self, g: &[T], x: &[T]) {
        for ((row, b), &gi) in self
            .weight
            .chunks_exact_mut(self.in_dim)
            .zip(self.bias.iter_mut())
            .zip(g)
        {
            if gi == T::zero() {
                continue;
            }
            *b += gi;
            for (w, &xj) in row.iter_mut().zip(x) {
                *w += gi * xj;
            }
        }
    }

    fn cast<U: Real>(&self) -> Linear<U> {
        Linear {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            weight: cast_vec(&self.weight),
            bias: cast_vec(&self.bias),
        }
    }
}

/// Linear map followed by LayerNorm (scale and shift) and ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignerBlock<T> {
    pub linear: Linear<T>,
    pub ln_scale: Vec<T>,
    pub ln_shift: Vec<T>,
}

/// Every learnable tensor of the reranker. Also used as the gradient
/// container, since gradients share the parameters' shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct RerankerParams<T> {
    pub config: RerankerConfig,
    pub img_proj: Linear<T>,
    pub txt_proj: Linear<T>,
    /// Reference-side projections when projections are not shared.
    pub ref_img_proj: Option<Linear<T>>,
    pub ref_txt_proj: Option<Linear<T>>,
    pub aligner: Vec<AlignerBlock<T>>,
    /// `latent x latent`, row-major.
    pub score_weight: Vec<T>,
    pub score_bias: T,
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

fn cast_vec<T: Real, U: Real>(v: &[T]) -> Vec<U> {
    v.iter()
        .map(|x| U::from_f64(x.to_f64_lossy()).expect("representable"))
        .collect()
}

impl<T: Real> RerankerParams<T> {
    /// All-zero tensors shaped by `config` (LayerNorm scales included).
    pub fn zeros(config: &RerankerConfig) -> Result<Self, RerankError> {
        config.validate()?;
        let h = config.latent_dim;
        let separate = !config.shared_projections;
        Ok(Self {
            config: config.clone(),
            img_proj: Linear::zeros(config.image_dim, h),
            txt_proj: Linear::zeros(config.text_dim, h),
            ref_img_proj: separate.then(|| Linear::zeros(config.image_dim, h)),
            ref_txt_proj: separate.then(|| Linear::zeros(config.text_dim, h)),
            aligner: (0..config.aligner_layers)
                .map(|l| {
                    let (i, o) = config.aligner_shape(l);
                    AlignerBlock {
                        linear: Linear::zeros(i, o),
                        ln_scale: vec![T::zero(); o],
                        ln_shift: vec![T::zero(); o],
                    }
                })
                .collect(),
            score_weight: vec![T::zero(); h * h],
            score_bias: T::zero(),
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.config).expect("config already validated")
    }

    /// Tensors in canonical order with their names and shapes.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[T])> {
        let mut out: Vec<(String, Vec<usize>, &[T])> = Vec::new();
        push_linear(&mut out, "img_proj", &self.img_proj);
        push_linear(&mut out, "txt_proj", &self.txt_proj);
        if let Some(l) = &self.ref_img_proj {
            push_linear(&mut out, "ref_img_proj", l);
        }
        if let Some(l) = &self.ref_txt_proj {
            push_linear(&mut out, "ref_txt_proj", l);
        }
        for (i, block) in self.aligner.iter().enumerate() {
            push_linear(&mut out, &format!("aligner.{i}.linear"), &block.linear);
            out.push((format!("aligner.{i}.ln.scale"), vec![block.ln_scale.len()], &block.ln_scale));
            out.push((format!("aligner.{i}.ln.shift"), vec![block.ln_shift.len()], &block.ln_shift));
        }
        let h = self.config.latent_dim;
        out.push(("score.weight".into(), vec![h, h], &self.score_weight));
        out.push(("score.bias".into(), vec![], std::slice::from_ref(&self.score_bias)));
        out
    }

    /// Mutable tensors in the same order as [`tensors`](Self::tensors).
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [T])> {
        let mut out: Vec<(String, &mut [T])> = Vec::new();
        push_linear_mut(&mut out, "img_proj", &mut self.img_proj);
        push_linear_mut(&mut out, "txt_proj", &mut self.txt_proj);
        if let Some(l) = &mut self.ref_img_proj {
            push_linear_mut(&mut out, "ref_img_proj", l);
        }
        if let Some(l) = &mut self.ref_txt_proj {
            push_linear_mut(&mut out, "ref_txt_proj", l);
        }
        for (i, block) in self.aligner.iter_mut().enumerate() {
            push_linear_mut(&mut out, &format!("aligner.{i}.linear"), &mut block.linear);
            out.push((format!("aligner.{i}.ln.scale"), &mut block.ln_scale));
            out.push((format!("aligner.{i}.ln.shift"), &mut block.ln_shift));
        }
        out.push(("score.weight".into(), &mut self.score_weight));
        out.push(("score.bias".into(), std::slice::from_mut(&mut self.score_bias)));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, _, d)| d.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, _, d)| d.iter().all(|v| v.is_finite()))
    }

    /// Same parameters in another precision.
    pub fn cast<U: Real>(&self) -> RerankerParams<U> {
        RerankerParams {
            config: self.config.clone(),
            img_proj: self.img_proj.cast(),
            txt_proj: self.txt_proj.cast(),
            ref_img_proj: self.ref_img_proj.as_ref().map(Linear::cast),
            ref_txt_proj: self.ref_txt_proj.as_ref().map(Linear::cast),
            aligner: self
                .aligner
                .iter()
                .map(|b| AlignerBlock {
                    linear: b.linear.cast(),
                    ln_scale: cast_vec(&b.ln_scale),
                    ln_shift: cast_vec(&b.ln_shift),
                })
                .collect(),
            score_weight: cast_vec(&self.score_weight),
            score_bias: U::from_f64(self.score_bias.to_f64_lossy()).expect("representable"),
        }
    }

    /// `self += alpha * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Self, alpha: T) {
        let src = other.tensors();
        for ((_, dst), (_, _, src)) in self.tensors_mut().into_iter().zip(src) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += alpha * s;
            }
        }
    }

    pub fn scale(&mut self, alpha: T) {
        for (_, t) in self.tensors_mut() {
            for v in t.iter_mut() {
                *v *= alpha;
            }
        }
    }

    /// Global L2 norm over every tensor.
    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, _, d)| d.iter())
            .map(|v| {
                let v = v.to_f64_lossy();
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn same_shapes<U: Real>(&self, other: &RerankerParams<U>) -> bool {
        let a = self.tensors();
        let b = other.tensors();
        a.len() == b.len()
            && a.iter()
                .zip(&b)
                .all(|(x, y)| x.0 == y.0 && x.1 == y.1 && x.2.len() == y.2.len())
    }
}

fn push_linear<'a, T>(out: &mut Vec<(String, Vec<usize>, &'a [T])>, name: &str, l: &'a Linear<T>) {
    out.push((format!("{name}.weight"), vec![l.out_dim, l.in_dim], &l.weight));
    out.push((format!("{name}.bias"), vec![l.out_dim], &l.bias));
}

fn push_linear_mut<'a, T>(out: &mut Vec<(String, &'a mut [T])>, name: &str, l: &'a mut Linear<T>) {
    out.push((format!("{name}.weight"), &mut l.weight));
    out.push((format!("{name}.bias"), &mut l.bias));
}

fn xavier(rng: &mut ChaCha8Rng, l: &mut Linear<f32>) {
    let bound = (6.0f64 / (l.in_dim + l.out_dim) as f64).sqrt() as f32;
    for w in &mut l.weight {
        *w = rng.random_range(-bound..=bound);
    }
}

/// Xavier-uniform weights, zero biases, unit LayerNorm scale and zero
/// shift. Deterministic in `config.init_seed`.
pub fn init_params(config: &RerankerConfig) -> Result<RerankerParams<f32>, RerankError> {
    let mut p = RerankerParams::<f32>::zeros(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
    xavier(&mut rng, &mut p.img_proj);
    xavier(&mut rng, &mut p.txt_proj);
    if let Some(l) = &mut p.ref_img_proj {
        xavier(&mut rng, l);
    }
    if let Some(l) = &mut p.ref_txt_proj {
        xavier(&mut rng, l);
    }
    for block in &mut p.aligner {
        xavier(&mut rng, &mut block.linear);
        block.ln_scale.fill(1.0);
    }
    let h = config.latent_dim;
    let mut score = Linear::<f32>::zeros(h, h);
    xavier(&mut rng, &mut score);
    p.score_weight = score.weight;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xavier_bound_for_1024_to_512() {
        let config = RerankerConfig {
            image_dim: 1024,
            text_dim: 8,
            latent_dim: 512,
            aligner_layers: 1,
            aligner_hidden: 4,
            ..RerankerConfig::default()
        };
        let p = init_params(&config).unwrap();
        let bound = (6.0f64 / 1536.0).sqrt();
        assert_eq!(bound, 0.0625);
        assert!(p.img_proj.weight.iter().all(|w| f64::from(w.abs()) <= bound));
        let max = p.img_proj.weight.iter().fold(0.0f32, |m, w| m.max(w.abs()));
        assert!(f64::from(max) > 0.9 * bound);
    }

    #[test]
    fn biases_and_shifts_start_at_zero() {
        let config = RerankerConfig {
            image_dim: 6,
            text_dim: 5,
            latent_dim: 4,
            aligner_hidden: 3,
            ..RerankerConfig::default()
        };
        let p = init_params(&config).unwrap();
        assert!(p.img_proj.bias.iter().chain(&p.txt_proj.bias).all(|&b| b == 0.0));
        for block in &p.aligner {
            assert!(block.linear.bias.iter().all(|&b| b == 0.0));
            assert!(block.ln_shift.iter().all(|&b| b == 0.0));
            assert!(block.ln_scale.iter().all(|&s| s == 1.0));
        }
        assert_eq!(p.score_bias, 0.0);
        assert_eq!(p.aligner[0].linear.in_dim, 4);
        assert_eq!(p.aligner[0].linear.out_dim, 3);
        assert_eq!(p.aligner[1].linear.out_dim, 4);
    }

    #[test]
    fn same_seed_same_params() {
        let config = RerankerConfig {
            image_dim: 6,
            text_dim: 5,
            latent_dim: 4,
            aligner_hidden: 3,
            init_seed: 9,
            ..RerankerConfig::default()
        };
        assert_eq!(init_params(&config).unwrap(), init_params(&config).unwrap());
        let other = RerankerConfig {
            init_seed: 10,
            ..config.clone()
        };
        assert_ne!(init_params(&other).unwrap().img_proj, init_params(&config).unwrap().img_proj);
    }

    #[test]
    fn invalid_config() {
        let c = RerankerConfig {
            aligner_layers: 0,
            ..RerankerConfig::default()
        };
        assert!(init_params(&c).is_err());
    }

    #[test]
    fn separate_projections_add_tensors() {
        let shared = RerankerConfig {
            image_dim: 3,
            text_dim: 2,
            latent_dim: 2,
            aligner_hidden: 2,
            ..RerankerConfig::default()
        };
        let separate = RerankerConfig {
            shared_projections: false,
            ..shared.clone()
        };
        let a = init_params(&shared).unwrap();
        let b = init_params(&separate).unwrap();
        assert_eq!(b.tensors().len(), a.tensors().len() + 4);
    }
}
