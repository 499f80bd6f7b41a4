//! Cross-view geo-localization: two-phase retrieval over precomputed
//! embeddings.
//!
//! Phase one ranks satellite references for a ground-level query by cosine
//! similarity of image embeddings ([`retriever`]). Phase two reranks the
//! top-k candidates with a small trainable network that fuses image and
//! caption embeddings of both views ([`reranker`]), trained with a margin
//! ranking loss ([`trainer`]). Captions come from templated answers to a
//! fixed multiple-choice questionnaire ([`cvlang`]); results are scored with
//! recall, average precision and geographic thresholds ([`evaluator`]).
//! Data ingestion, the on-disk store and synthetic datasets live in
//! [`geostore`].

pub mod cvlang;
pub mod digest;
pub mod error;
pub mod evaluator;
pub mod geostore;
pub mod jsonl;
pub mod reranker;
pub mod retriever;
pub mod trainer;

pub use error::{Error, Result};
pub use evaluator::{EvalConfig, EvalReport};
pub use geostore::{
    Embedding, EvalInstance, GeoCoord, GeoStore, QueryRecord, ReferenceRecord, StoreManifest,
    SynthConfig,
};
pub use reranker::{RerankerConfig, RerankerParams};
pub use retriever::{Accumulation, RankEntry, Ranking};
pub use trainer::{TrainConfig, TrainReport, TrainingSample};
