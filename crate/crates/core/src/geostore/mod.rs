//! Data model, on-disk store, ingestion and synthetic datasets.
//!
//! A store directory holds:
//!
//! | file | content |
//! |------|---------|
//! | `manifest.txt` | `key=value` [`StoreManifest`] |
//! | `{references,queries}.image.gvlm` + `.ids` | image embedding matrices |
//! | `{references,queries}.text.gvlm` + `.ids` | text embeddings, only for records that have one |
//! | `{references,queries}.captions.jsonl` | `{"id": .., "caption": ..}` |
//! | `{references,queries}.coords.jsonl` | `{"id": .., "lat": .., "lon": ..}` |
//! | `ground_truth.jsonl` | `{"query_id": .., "positives": [..], "semi_positives": [..]}` |

mod ingest;
mod instances;
pub mod matrix;
mod store;
mod synth;
mod types;

pub use ingest::{ingest, IngestSources, SideSources};
pub use instances::build_eval_instances;
pub use matrix::{read_embedding_matrix, write_embedding_matrix, EmbeddingMatrix, MatrixError};
pub use store::{store_digest, GeoStore, StoreHandle};
pub use synth::{generate_synthetic, SynthConfig};
pub use types::{
    valid_id, CoordRangeError, Embedding, EmbeddingError, EvalInstance, GeoCoord, ManifestError,
    QueryRecord, ReferenceRecord, StoreManifest, STORE_FORMAT_VERSION,
};

use crate::jsonl::JsonlError;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("{file}: {source}")]
    Manifest {
        file: String,
        #[source]
        source: ManifestError,
    },
    #[error("{file}:{line}: id {id:?}: dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch {
        file: String,
        line: usize,
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("{file}:{line}: duplicate id {id:?}")]
    DuplicateId { file: String, line: usize, id: String },
    #[error("{file}:{line}: invalid id {id:?}")]
    InvalidId { file: String, line: usize, id: String },
    #[error("{file}:{line}: id {id:?} does not match any record")]
    UnknownId { file: String, line: usize, id: String },
    #[error("{file}:{line}: query {query_id:?}: ground-truth id {reference_id:?} is not a known reference")]
    UnresolvedGroundTruth {
        file: String,
        line: usize,
        query_id: String,
        reference_id: String,
    },
    #[error("{file}:{line}: id {id:?}: {source}")]
    BadEmbedding {
        file: String,
        line: usize,
        id: String,
        #[source]
        source: EmbeddingError,
    },
    #[error("{file}:{line}: id {id:?}: image embedding has zero norm")]
    ZeroNorm { file: String, line: usize, id: String },
    #[error("{file}:{line}: id {id:?}: {source}")]
    BadCoord {
        file: String,
        line: usize,
        id: String,
        #[source]
        source: CoordRangeError,
    },
    #[error("{what}: manifest declares {expected}, found {found}")]
    CountMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("query {query_id:?} has an empty ground-truth set")]
    EmptyGroundTruth { query_id: String },
    #[error("invalid synthetic config: {0}")]
    SynthConfig(String),
}

impl StoreError {
    pub fn is_io(&self) -> bool {
        match self {
            StoreError::Io { .. } => true,
            StoreError::Jsonl(e) => e.is_io(),
            StoreError::Matrix(e) => e.is_io(),
            _ => false,
        }
    }
}
