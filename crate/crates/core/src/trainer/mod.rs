//! Learning-to-rank training of the reranker.
//!
//! Each [`TrainingSample`] is a query with its top-10 retrieved candidates,
//! one of which is the true match. The loss is a margin hinge averaged over
//! the negatives:
//!
//! ```text
//! L = (1/|N|) * sum_i max(0, m - (s_pos - s_i))
//! ```
//!
//! Gradients are derived by hand (see [`loss_and_gradients`]) and checked
//! against central finite differences by [`gradcheck`].

mod backward;
mod gradcheck;
mod loss;
mod optim;
mod samples;
mod train;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::reranker::RerankError;

pub use backward::{loss_and_gradients, sample_loss};
pub use gradcheck::{
    gradcheck, gradcheck_sample, random_problem, relative_error, GradCheckReport,
    GRADCHECK_TOLERANCE,
};
pub use loss::{margin_loss, margin_loss_gradient};
pub use optim::{clip_gradients, load_training_checkpoint, optimizer_step, save_training_checkpoint, OptimizerState};
pub use samples::{
    build_training_samples, read_samples, write_samples, SamplePolicy, SampleSet, TrainingSample,
};
pub use train::{train, EpochRecord, TrainReport};

/// Whether the hinge compares sigmoid scores or the logits before the
/// sigmoid. With scores in (0, 1) and `m = 1` every hinge is active.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossOn {
    #[default]
    Scores,
    Logits,
}

impl std::str::FromStr for LossOn {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "scores" => Ok(LossOn::Scores),
            "logits" => Ok(LossOn::Logits),
            _ => Err(format!("expected scores or logits, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            _ => Err(format!("expected sgd or adam, got {s:?}")),
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub margin: f64,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub shuffle_seed: u64,
    /// Rescale the batch gradient to at most this global L2 norm.
    pub grad_clip: Option<f64>,
    pub loss_on: LossOn,
    /// Fraction of samples held out for validation.
    pub val_split: f64,
    /// Where per-epoch checkpoints go; `None` skips them.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            margin: 1.0,
            optimizer: OptimizerKind::Adam,
            lr: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 16,
            epochs: 10,
            shuffle_seed: 0,
            grad_clip: None,
            loss_on: LossOn::Scores,
            val_split: 0.2,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.into()));
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return bad("margin must be finite and non-negative");
        }
        // lr = 0 is allowed: it freezes the parameters.
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return bad("lr must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.adam_eps.is_finite() && self.adam_eps > 0.0) {
            return bad("adam_eps must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if let Some(c) = self.grad_clip {
            if !(c.is_finite() && c > 0.0) {
                return bad("grad_clip must be positive");
            }
        }
        if !(0.0..1.0).contains(&self.val_split) {
            return bad("val_split must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid train config: {0}")]
    Config(String),
    #[error("negative set is empty")]
    EmptyNegatives,
    #[error("no training samples")]
    NoSamples,
    #[error("sample for query {query_id:?}: {message}")]
    BadSample { query_id: String, message: String },
    #[error("unknown query id {0:?}")]
    UnknownQuery(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch} (queries {first_query:?}..)")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        first_query: String,
    },
    #[error("gradient shapes do not match parameter shapes")]
    ShapeMismatch,
    #[error(transparent)]
    Rerank(#[from] RerankError),
    #[error(transparent)]
    Jsonl(#[from] crate::jsonl::JsonlError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl TrainError {
    pub fn is_io(&self) -> bool {
        match self {
            TrainError::Io { .. } => true,
            TrainError::Rerank(e) => e.is_io(),
            TrainError::Jsonl(e) => e.is_io(),
            _ => false,
        }
    }
}
