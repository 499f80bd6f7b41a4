use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::store::{CaptionRow, CoordRow, GroundTruthRow};
use super::types::{valid_id, Embedding, GeoCoord, QueryRecord, ReferenceRecord, StoreManifest};
use super::{GeoStore, StoreError, StoreHandle};
use crate::jsonl;

/// Input files for one side (references or queries).
///
/// `embeddings` rows are `{"id": .., "image": [..], "text": [..]}` with
/// `text` optional. `text_embeddings` rows are `{"id": .., "embedding": [..]}`
/// as written by the embedding client.
#[derive(Debug, Clone, Default)]
pub struct SideSources {
    pub embeddings: PathBuf,
    pub text_embeddings: Option<PathBuf>,
    pub captions: Option<PathBuf>,
    pub coords: Option<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct IngestSources {
    pub references: SideSources,
    pub queries: Option<SideSources>,
    pub ground_truth: Option<PathBuf>,
}

#[derive(Deserialize)]
struct EmbeddingRow {
    id: String,
    image: Vec<f32>,
    #[serde(default)]
    text: Option<Vec<f32>>,
}

#[derive(Deserialize)]
struct TextEmbeddingRow {
    id: String,
    embedding: Vec<f32>,
}

struct Parsed {
    id: String,
    image: Embedding,
    text: Option<Embedding>,
    caption: Option<String>,
    coord: Option<GeoCoord>,
}

/// Validates the input files against `manifest` and persists a store into
/// `out_dir`. Re-ingesting identical inputs yields a byte-identical store.
pub fn ingest(
    sources: &IngestSources,
    manifest: &StoreManifest,
    out_dir: &Path,
) -> Result<StoreHandle, StoreError> {
    let refs = read_side(&sources.references, manifest)?;
    if refs.len() != manifest.reference_count {
        return Err(StoreError::CountMismatch {
            what: sources.references.embeddings.display().to_string(),
            expected: manifest.reference_count,
            found: refs.len(),
        });
    }
    let ref_ids: BTreeSet<&str> = refs.iter().map(|r| r.id.as_str()).collect();

    let queries = match &sources.queries {
        Some(side) => read_side(side, manifest)?,
        None => Vec::new(),
    };
    if queries.len() != manifest.query_count {
        let what = sources
            .queries
            .as_ref()
            .map(|s| s.embeddings.display().to_string())
            .unwrap_or_else(|| "<no query file>".into());
        return Err(StoreError::CountMismatch {
            what,
            expected: manifest.query_count,
            found: queries.len(),
        });
    }

    let mut truth: HashMap<String, (BTreeSet<String>, BTreeSet<String>)> = HashMap::new();
    if let Some(gt_path) = &sources.ground_truth {
        let file = gt_path.display().to_string();
        let query_ids: BTreeSet<&str> = queries.iter().map(|q| q.id.as_str()).collect();
        for (line, row) in jsonl::read::<GroundTruthRow>(gt_path)? {
            if !query_ids.contains(row.query_id.as_str()) {
                return Err(StoreError::UnknownId {
                    file,
                    line,
                    id: row.query_id,
                });
            }
            for id in row.positives.iter().chain(&row.semi_positives) {
                if !ref_ids.contains(id.as_str()) {
                    return Err(StoreError::UnresolvedGroundTruth {
                        file,
                        line,
                        query_id: row.query_id,
                        reference_id: id.clone(),
                    });
                }
            }
            if row.positives.is_empty() {
                return Err(StoreError::EmptyGroundTruth {
                    query_id: row.query_id,
                });
            }
            let entry = (
                row.positives.into_iter().collect(),
                row.semi_positives.into_iter().collect(),
            );
            if truth.insert(row.query_id.clone(), entry).is_some() {
                return Err(StoreError::DuplicateId {
                    file,
                    line,
                    id: row.query_id,
                });
            }
        }
    }

    let references = refs
        .into_iter()
        .map(|p| ReferenceRecord {
            id: p.id,
            image: p.image,
            text: p.text,
            caption: p.caption,
            coord: p.coord,
        })
        .collect();
    let mut query_records = Vec::with_capacity(queries.len());
    for p in queries {
        let (ground_truth, semi_positives) = truth
            .remove(&p.id)
            .ok_or_else(|| StoreError::EmptyGroundTruth { query_id: p.id.clone() })?;
        query_records.push(QueryRecord {
            id: p.id,
            image: p.image,
            text: p.text,
            caption: p.caption,
            coord: p.coord,
            ground_truth,
            semi_positives,
        });
    }
    let store = GeoStore::new(
        manifest.image_dim,
        manifest.text_dim,
        references,
        query_records,
    )?;
    store.persist(out_dir)
}

fn read_side(side: &SideSources, manifest: &StoreManifest) -> Result<Vec<Parsed>, StoreError> {
    let file = side.embeddings.display().to_string();
    let mut out: Vec<Parsed> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (line, row) in jsonl::read::<EmbeddingRow>(&side.embeddings)? {
        if !valid_id(&row.id) {
            return Err(StoreError::InvalidId { file, line, id: row.id });
        }
        if index.contains_key(&row.id) {
            return Err(StoreError::DuplicateId { file, line, id: row.id });
        }
        let image = embedding(&file, line, &row.id, row.image, manifest.image_dim)?;
        if image.norm() == 0.0 {
            return Err(StoreError::ZeroNorm { file, line, id: row.id });
        }
        let text = row
            .text
            .map(|t| embedding(&file, line, &row.id, t, manifest.text_dim))
            .transpose()?;
        index.insert(row.id.clone(), out.len());
        out.push(Parsed {
            id: row.id,
            image,
            text,
            caption: None,
            coord: None,
        });
    }

    if let Some(path) = &side.text_embeddings {
        let file = path.display().to_string();
        for (line, row) in jsonl::read::<TextEmbeddingRow>(path)? {
            let Some(&i) = index.get(&row.id) else {
                return Err(StoreError::UnknownId { file, line, id: row.id });
            };
            let emb = embedding(&file, line, &row.id, row.embedding, manifest.text_dim)?;
            if out[i].text.replace(emb).is_some() {
                return Err(StoreError::DuplicateId { file, line, id: row.id });
            }
        }
    }
    if let Some(path) = &side.captions {
        let file = path.display().to_string();
        for (line, row) in jsonl::read::<CaptionRow>(path)? {
            let Some(&i) = index.get(&row.id) else {
                return Err(StoreError::UnknownId { file, line, id: row.id });
            };
            if out[i].caption.replace(row.caption).is_some() {
                return Err(StoreError::DuplicateId { file, line, id: row.id });
            }
        }
    }
    if let Some(path) = &side.coords {
        let file = path.display().to_string();
        for (line, row) in jsonl::read::<CoordRow>(path)? {
            let Some(&i) = index.get(&row.id) else {
                return Err(StoreError::UnknownId { file, line, id: row.id });
            };
            let coord = GeoCoord::new(row.lat, row.lon).map_err(|source| StoreError::BadCoord {
                file: file.clone(),
                line,
                id: row.id.clone(),
                source,
            })?;
            if out[i].coord.replace(coord).is_some() {
                return Err(StoreError::DuplicateId { file, line, id: row.id });
            }
        }
    }
    Ok(out)
}

fn embedding(
    file: &str,
    line: usize,
    id: &str,
    values: Vec<f32>,
    expected: usize,
) -> Result<Embedding, StoreError> {
    if values.len() != expected {
        return Err(StoreError::DimensionMismatch {
            file: file.into(),
            line,
            id: id.into(),
            expected,
            found: values.len(),
        });
    }
    Embedding::new(values).map_err(|source| StoreError::BadEmbedding {
        file: file.into(),
        line,
        id: id.into(),
        source,
    })
}
