//! Phase-two reranking network.
//!
//! Each side of a query/reference pair is scored from its image and text
//! embeddings:
//!
//! ```text
//! fused   = P_img(image) + P_txt(text)                      (shared latent space)
//! aligned = [Linear -> LayerNorm -> ReLU] x aligner_layers  (per side)
//! score   = sigmoid( (W aligned_q) . aligned_r + b )
//! ```
//!
//! Parameters are generic over [`Real`] so the same code runs in `f32` for
//! training and `f64` for gradient checks and inference.

mod checkpoint;
mod network;
mod params;

pub use checkpoint::{CheckpointError, CheckpointFile, NamedTensor, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use network::{
    align, align_traced, encode_side, project_fuse, rerank, score_pair, score_pair_traced, sigmoid,
    AlignTrace, BlockTrace, apply_score_weight, to_real,
    PairInput, PairScoreTrace, Side,
};
pub use params::{init_params, Linear, AlignerBlock, Real, RerankerParams};

#[derive(Debug, Clone, PartialEq)]
pub struct RerankerConfig {
    pub image_dim: usize,
    pub text_dim: usize,
    pub latent_dim: usize,
    pub aligner_layers: usize,
    pub aligner_hidden: usize,
    pub ln_epsilon: f64,
    /// Query and reference sides share the projection maps.
    pub shared_projections: bool,
    pub init_seed: u64,
}

impl Default for RerankerConfig {
    fn default() -> Self {
        Self {
            image_dim: 1024,
            text_dim: 1536,
            latent_dim: 512,
            aligner_layers: 2,
            aligner_hidden: 512,
            ln_epsilon: 1e-5,
            shared_projections: true,
            init_seed: 0,
        }
    }
}

impl RerankerConfig {
    pub fn validate(&self) -> Result<(), RerankError> {
        let bad = |m: &str| Err(RerankError::Config(m.into()));
        if self.image_dim == 0
            || self.text_dim == 0
            || self.latent_dim == 0
            || self.aligner_hidden == 0
        {
            return bad("all dimensions must be positive");
        }
        if self.aligner_layers == 0 {
            return bad("aligner_layers must be at least 1");
        }
        if !(self.ln_epsilon.is_finite() && self.ln_epsilon > 0.0) {
            return bad("ln_epsilon must be positive");
        }
        Ok(())
    }

    /// `(in, out)` of aligner block `layer`.
    pub fn aligner_shape(&self, layer: usize) -> (usize, usize) {
        let last = self.aligner_layers - 1;
        let input = if layer == 0 { self.latent_dim } else { self.aligner_hidden };
        let output = if layer == last { self.latent_dim } else { self.aligner_hidden };
        (input, output)
    }

    /// `key=value` lines, the same form the run configuration uses.
    pub fn to_kv(&self) -> Vec<(String, String)> {
        vec![
            ("image_dim".into(), self.image_dim.to_string()),
            ("text_dim".into(), self.text_dim.to_string()),
            ("latent_dim".into(), self.latent_dim.to_string()),
            ("aligner_layers".into(), self.aligner_layers.to_string()),
            ("aligner_hidden".into(), self.aligner_hidden.to_string()),
            ("ln_epsilon".into(), self.ln_epsilon.to_string()),
            ("shared_projections".into(), self.shared_projections.to_string()),
            ("init_seed".into(), self.init_seed.to_string()),
        ]
    }

    pub fn from_kv<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self, RerankError> {
        let mut c = Self::default();
        for (key, value) in pairs {
            let bad = || RerankError::Config(format!("bad value {value:?} for {key}"));
            match key {
                "image_dim" => c.image_dim = value.parse().map_err(|_| bad())?,
                "text_dim" => c.text_dim = value.parse().map_err(|_| bad())?,
                "latent_dim" => c.latent_dim = value.parse().map_err(|_| bad())?,
                "aligner_layers" => c.aligner_layers = value.parse().map_err(|_| bad())?,
                "aligner_hidden" => c.aligner_hidden = value.parse().map_err(|_| bad())?,
                "ln_epsilon" => c.ln_epsilon = value.parse().map_err(|_| bad())?,
                "shared_projections" => c.shared_projections = value.parse().map_err(|_| bad())?,
                "init_seed" => c.init_seed = value.parse().map_err(|_| bad())?,
                _ => {}
            }
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RerankError {
    #[error("invalid reranker config: {0}")]
    Config(String),
    #[error("{what}: expected dim {expected}, found {found}")]
    ShapeMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("record {id:?} has no text embedding")]
    MissingText { id: String },
    #[error("unknown {kind} id {id:?}")]
    UnknownId { kind: &'static str, id: String },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

impl RerankError {
    pub fn is_io(&self) -> bool {
        matches!(self, RerankError::Checkpoint(e) if e.is_io())
    }
}
pub use params::dot;
