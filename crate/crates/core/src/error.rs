//! Crate-wide error type.

use crate::cvlang::LangError;
use crate::evaluator::EvalError;
use crate::geostore::StoreError;
use crate::jsonl::JsonlError;
use crate::reranker::RerankError;
use crate::retriever::RetrievalError;
use crate::trainer::TrainError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Rerank(#[from] RerankError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl Error {
    /// True when the failure came from the filesystem or network rather than
    /// from invalid data.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Store(e) => e.is_io(),
            Error::Jsonl(e) => e.is_io(),
            Error::Retrieval(_) => false,
            Error::Rerank(e) => e.is_io(),
            Error::Train(e) => e.is_io(),
            Error::Lang(e) => e.is_io(),
            Error::Eval(e) => e.is_io(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
