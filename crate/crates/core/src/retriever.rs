//! Phase-one retrieval: cosine similarity of image embeddings and top-k
//! selection over the reference store.
//!
//! Rankings are ordered by score descending with ties broken by ascending
//! reference id. [`top_k`] selects with a bounded heap; [`brute_force_rank`]
//! sorts everything and is the oracle `top_k` is checked against.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geostore::{Embedding, GeoStore};
use crate::jsonl::{self, JsonlError};

pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RetrievalError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("reference store is empty")]
    EmptyStore,
    #[error("k must be at least 1")]
    ZeroK,
}

/// Accumulator width for dot products and norms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Accumulation {
    F32,
    #[default]
    F64,
}

/// Cosine similarity with 64-bit accumulation.
pub fn cosine(u: &Embedding, v: &Embedding) -> Result<f64, RetrievalError> {
    cosine_with(u.values(), v.values(), Accumulation::F64)
}

pub fn cosine_with(u: &[f32], v: &[f32], acc: Accumulation) -> Result<f64, RetrievalError> {
    if u.len() != v.len() {
        return Err(RetrievalError::DimMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let (dot, uu, vv) = match acc {
        Accumulation::F64 => {
            let mut dot = 0.0f64;
            let mut uu = 0.0f64;
            let mut vv = 0.0f64;
            for (&a, &b) in u.iter().zip(v) {
                let (a, b) = (f64::from(a), f64::from(b));
                dot += a * b;
                uu += a * a;
                vv += b * b;
            }
            (dot, uu, vv)
        }
        Accumulation::F32 => {
            let mut dot = 0.0f32;
            let mut uu = 0.0f32;
            let mut vv = 0.0f32;
            for (&a, &b) in u.iter().zip(v) {
                dot += a * b;
                uu += a * a;
                vv += b * b;
            }
            (f64::from(dot), f64::from(uu), f64::from(vv))
        }
    };
    if uu == 0.0 || vv == 0.0 {
        return Err(RetrievalError::ZeroNorm);
    }
    // sqrt(uu * vv) rather than sqrt(uu) * sqrt(vv): identical vectors then
    // give exactly 1.
    Ok((dot / (uu * vv).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub reference_id: String,
    pub score: f64,
}

/// Ranking order: higher score first, then ascending id.
pub fn rank_order(a: &RankEntry, b: &RankEntry) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.reference_id.cmp(&b.reference_id))
}

/// Ordered candidates for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub query_id: String,
    pub k: usize,
    pub entries: Vec<RankEntry>,
    pub reranked: bool,
}

impl Ranking {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.reference_id.as_str())
    }

    /// 1-based rank of `id`, if present.
    pub fn rank_of(&self, id: &str) -> Option<usize> {
        self.ids().position(|r| r == id).map(|p| p + 1)
    }
}

// Heap wrapper: the "greatest" element is the worst-ranked one, so the heap
// top is the candidate to evict.
struct Worst(RankEntry);

impl PartialEq for Worst {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Worst {}
impl PartialOrd for Worst {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Worst {
    fn cmp(&self, other: &Self) -> Ordering {
        rank_order(&self.0, &other.0)
    }
}

fn check_query(query: &Embedding, store: &GeoStore, k: usize) -> Result<(), RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::ZeroK);
    }
    if store.references().is_empty() {
        return Err(RetrievalError::EmptyStore);
    }
    if query.dim() != store.image_dim() {
        return Err(RetrievalError::DimMismatch {
            left: query.dim(),
            right: store.image_dim(),
        });
    }
    Ok(())
}

/// The `k` references most similar to `query`, restricted to ids accepted
/// by `keep`.
pub fn top_k_filtered(
    query: &Embedding,
    store: &GeoStore,
    k: usize,
    acc: Accumulation,
    keep: impl Fn(&str) -> bool,
) -> Result<Vec<RankEntry>, RetrievalError> {
    check_query(query, store, k)?;
    let mut heap: BinaryHeap<Worst> = BinaryHeap::with_capacity(k + 1);
    for r in store.references().iter().filter(|r| keep(&r.id)) {
        let entry = RankEntry {
            reference_id: r.id.clone(),
            score: cosine_with(query.values(), r.image.values(), acc)?,
        };
        if heap.len() < k {
            heap.push(Worst(entry));
        } else if let Some(worst) = heap.peek() {
            if rank_order(&entry, &worst.0) == Ordering::Less {
                heap.pop();
                heap.push(Worst(entry));
            }
        }
    }
    Ok(heap.into_sorted_vec().into_iter().map(|w| w.0).collect())
}

pub fn top_k(
    query_id: &str,
    query: &Embedding,
    store: &GeoStore,
    k: usize,
    acc: Accumulation,
) -> Result<Ranking, RetrievalError> {
    let entries = top_k_filtered(query, store, k, acc, |_| true)?;
    Ok(Ranking {
        query_id: query_id.into(),
        k,
        entries,
        reranked: false,
    })
}

/// Exhaustive exact ranking of every reference.
pub fn brute_force_rank(
    query_id: &str,
    query: &Embedding,
    store: &GeoStore,
    acc: Accumulation,
) -> Result<Ranking, RetrievalError> {
    let k = store.references().len().max(1);
    check_query(query, store, k)?;
    let mut entries = store
        .references()
        .iter()
        .map(|r| {
            Ok(RankEntry {
                reference_id: r.id.clone(),
                score: cosine_with(query.values(), r.image.values(), acc)?,
            })
        })
        .collect::<Result<Vec<_>, RetrievalError>>()?;
    entries.sort_by(rank_order);
    Ok(Ranking {
        query_id: query_id.into(),
        k,
        entries,
        reranked: false,
    })
}

/// Top-k for every query in the store, in store order. Queries run in
/// parallel.
pub fn retrieve_all(
    store: &GeoStore,
    k: usize,
    acc: Accumulation,
) -> Result<Vec<Ranking>, RetrievalError> {
    store
        .queries()
        .par_iter()
        .map(|q| top_k(&q.id, &q.image, store, k, acc))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct RankingRow {
    query_id: String,
    entries: Vec<(String, f64)>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    reranked: bool,
}

impl From<&Ranking> for RankingRow {
    fn from(r: &Ranking) -> Self {
        Self {
            query_id: r.query_id.clone(),
            entries: r
                .entries
                .iter()
                .map(|e| (e.reference_id.clone(), e.score))
                .collect(),
            reranked: r.reranked,
        }
    }
}

/// Rankings as line-delimited JSON:
/// `{"query_id": .., "entries": [["ref", score], ..]}` plus
/// `"reranked": true` for reranked output.
pub fn rankings_to_jsonl(rankings: &[Ranking]) -> String {
    let rows: Vec<RankingRow> = rankings.iter().map(RankingRow::from).collect();
    jsonl::to_string(&rows)
}

pub fn write_rankings(path: &Path, rankings: &[Ranking]) -> Result<(), JsonlError> {
    let rows: Vec<RankingRow> = rankings.iter().map(RankingRow::from).collect();
    jsonl::write(path, &rows)
}

/// Reads rankings; `k` is taken to be the number of entries on each line.
pub fn read_rankings(path: &Path) -> Result<Vec<Ranking>, JsonlError> {
    Ok(jsonl::read::<RankingRow>(path)?
        .into_iter()
        .map(|(_, row)| Ranking {
            query_id: row.query_id,
            k: row.entries.len(),
            entries: row
                .entries
                .into_iter()
                .map(|(reference_id, score)| RankEntry {
                    reference_id,
                    score,
                })
                .collect(),
            reranked: row.reranked,
        })
        .collect())
}
