use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::matrix::{ids_path, read_labeled, EmbeddingMatrix};
use super::types::{valid_id, Embedding, GeoCoord, QueryRecord, ReferenceRecord, StoreManifest};
use super::StoreError;
use crate::digest::Digester;
use crate::jsonl;

pub(crate) const MANIFEST_FILE: &str = "manifest.txt";
pub(crate) const GROUND_TRUTH_FILE: &str = "ground_truth.jsonl";

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct CaptionRow {
    #[serde(alias = "image_id")]
    pub id: String,
    #[serde(alias = "description")]
    pub caption: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct CoordRow {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct GroundTruthRow {
    pub query_id: String,
    pub positives: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub semi_positives: Vec<String>,
}

/// An immutable, validated set of references and queries.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoStore {
    image_dim: usize,
    text_dim: usize,
    references: Vec<ReferenceRecord>,
    queries: Vec<QueryRecord>,
    reference_index: HashMap<String, usize>,
    query_index: HashMap<String, usize>,
}

/// A store loaded from (or persisted to) a directory.
#[derive(Debug, Clone)]
pub struct StoreHandle {
    pub dir: PathBuf,
    pub store: GeoStore,
}

impl StoreHandle {
    pub fn digest(&self) -> String {
        self.store.digest()
    }
}

impl GeoStore {
    /// Validates and indexes records. Errors locate the offending record by
    /// its 1-based position in `references` or `queries`.
    pub fn new(
        image_dim: usize,
        text_dim: usize,
        references: Vec<ReferenceRecord>,
        queries: Vec<QueryRecord>,
    ) -> Result<Self, StoreError> {
        let mut reference_index = HashMap::with_capacity(references.len());
        for (i, r) in references.iter().enumerate() {
            let file = "<references>";
            check_record(file, i + 1, &r.id, &r.image, r.text.as_ref(), image_dim, text_dim)?;
            if reference_index.insert(r.id.clone(), i).is_some() {
                return Err(StoreError::DuplicateId {
                    file: file.into(),
                    line: i + 1,
                    id: r.id.clone(),
                });
            }
        }
        let mut query_index = HashMap::with_capacity(queries.len());
        for (i, q) in queries.iter().enumerate() {
            let file = "<queries>";
            check_record(file, i + 1, &q.id, &q.image, q.text.as_ref(), image_dim, text_dim)?;
            if query_index.insert(q.id.clone(), i).is_some() {
                return Err(StoreError::DuplicateId {
                    file: file.into(),
                    line: i + 1,
                    id: q.id.clone(),
                });
            }
            if q.ground_truth.is_empty() {
                return Err(StoreError::EmptyGroundTruth {
                    query_id: q.id.clone(),
                });
            }
            for gt in q.ground_truth.iter().chain(&q.semi_positives) {
                if !reference_index.contains_key(gt) {
                    return Err(StoreError::UnresolvedGroundTruth {
                        file: file.into(),
                        line: i + 1,
                        query_id: q.id.clone(),
                        reference_id: gt.clone(),
                    });
                }
            }
        }
        Ok(Self {
            image_dim,
            text_dim,
            references,
            queries,
            reference_index,
            query_index,
        })
    }

    pub fn image_dim(&self) -> usize {
        self.image_dim
    }

    pub fn text_dim(&self) -> usize {
        self.text_dim
    }

    pub fn references(&self) -> &[ReferenceRecord] {
        &self.references
    }

    pub fn queries(&self) -> &[QueryRecord] {
        &self.queries
    }

    pub fn reference(&self, id: &str) -> Option<&ReferenceRecord> {
        self.reference_index.get(id).map(|&i| &self.references[i])
    }

    pub fn query(&self, id: &str) -> Option<&QueryRecord> {
        self.query_index.get(id).map(|&i| &self.queries[i])
    }

    pub fn manifest(&self) -> StoreManifest {
        StoreManifest::new(
            self.image_dim,
            self.text_dim,
            self.references.len(),
            self.queries.len(),
        )
    }

    /// Ground truth keyed by query id.
    pub fn ground_truth(&self) -> BTreeMap<String, BTreeSet<String>> {
        self.queries
            .iter()
            .map(|q| (q.id.clone(), q.ground_truth.clone()))
            .collect()
    }

    /// Coordinates of every record that has one, references and queries
    /// alike.
    pub fn coords(&self) -> HashMap<String, GeoCoord> {
        let refs = self
            .references
            .iter()
            .filter_map(|r| r.coord.map(|c| (r.id.clone(), c)));
        let queries = self
            .queries
            .iter()
            .filter_map(|q| q.coord.map(|c| (q.id.clone(), c)));
        refs.chain(queries).collect()
    }

    /// File name to byte content for the persisted form. Deterministic for a
    /// given store.
    pub fn encode_files(&self) -> BTreeMap<String, Vec<u8>> {
        let mut files = BTreeMap::new();
        files.insert(MANIFEST_FILE.to_string(), self.manifest().to_string().into_bytes());
        let refs: Vec<Side<'_>> = self
            .references
            .iter()
            .map(|r| Side {
                id: &r.id,
                image: &r.image,
                text: r.text.as_ref(),
                caption: r.caption.as_deref(),
                coord: r.coord,
            })
            .collect();
        encode_side(&mut files, "references", &refs, self.image_dim, self.text_dim);
        let queries: Vec<Side<'_>> = self
            .queries
            .iter()
            .map(|q| Side {
                id: &q.id,
                image: &q.image,
                text: q.text.as_ref(),
                caption: q.caption.as_deref(),
                coord: q.coord,
            })
            .collect();
        encode_side(&mut files, "queries", &queries, self.image_dim, self.text_dim);
        let gt: Vec<GroundTruthRow> = self
            .queries
            .iter()
            .map(|q| GroundTruthRow {
                query_id: q.id.clone(),
                positives: q.ground_truth.iter().cloned().collect(),
                semi_positives: q.semi_positives.iter().cloned().collect(),
            })
            .collect();
        files.insert(GROUND_TRUTH_FILE.to_string(), jsonl::to_string(&gt).into_bytes());
        files
    }

    /// Digest over the persisted form; equal for byte-identical stores.
    pub fn digest(&self) -> String {
        let mut d = Digester::new();
        for (name, bytes) in self.encode_files() {
            d.part(&name, &bytes);
        }
        d.finish()
    }

    /// Writes the store into `dir`, creating it if needed.
    pub fn persist(&self, dir: &Path) -> Result<StoreHandle, StoreError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| StoreError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        for (name, bytes) in self.encode_files() {
            let path = dir.join(&name);
            fs::write(&path, bytes).map_err(io(&path))?;
        }
        Ok(StoreHandle {
            dir: dir.to_path_buf(),
            store: self.clone(),
        })
    }

    pub fn load(dir: &Path) -> Result<StoreHandle, StoreError> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&manifest_path).map_err(|source| StoreError::Io {
            path: manifest_path.display().to_string(),
            source,
        })?;
        let manifest = StoreManifest::parse(&text).map_err(|source| StoreError::Manifest {
            file: manifest_path.display().to_string(),
            source,
        })?;
        let refs = load_side(dir, "references", &manifest, manifest.reference_count)?;
        let queries = load_side(dir, "queries", &manifest, manifest.query_count)?;

        let gt_path = dir.join(GROUND_TRUTH_FILE);
        let mut gt: HashMap<String, (usize, GroundTruthRow)> = HashMap::new();
        for (line, row) in jsonl::read::<GroundTruthRow>(&gt_path)? {
            let id = row.query_id.clone();
            if gt.insert(id.clone(), (line, row)).is_some() {
                return Err(StoreError::DuplicateId {
                    file: gt_path.display().to_string(),
                    line,
                    id,
                });
            }
        }
        let references = refs
            .into_iter()
            .map(|s| ReferenceRecord {
                id: s.id,
                image: s.image,
                text: s.text,
                caption: s.caption,
                coord: s.coord,
            })
            .collect();
        let mut query_records = Vec::with_capacity(queries.len());
        for s in queries {
            let (ground_truth, semi_positives) = match gt.remove(&s.id) {
                Some((_, row)) => (
                    row.positives.into_iter().collect(),
                    row.semi_positives.into_iter().collect(),
                ),
                None => (BTreeSet::new(), BTreeSet::new()),
            };
            query_records.push(QueryRecord {
                id: s.id,
                image: s.image,
                text: s.text,
                caption: s.caption,
                coord: s.coord,
                ground_truth,
                semi_positives,
            });
        }
        if let Some((id, (line, _))) = gt.into_iter().min_by_key(|(_, (line, _))| *line) {
            return Err(StoreError::UnknownId {
                file: gt_path.display().to_string(),
                line,
                id,
            });
        }
        let store = GeoStore::new(
            manifest.image_dim,
            manifest.text_dim,
            references,
            query_records,
        )?;
        Ok(StoreHandle {
            dir: dir.to_path_buf(),
            store,
        })
    }
}

/// Digest of a persisted store directory, computed from the files on disk.
pub fn store_digest(dir: &Path) -> Result<String, StoreError> {
    let mut names: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|source| StoreError::Io {
            path: dir.display().to_string(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    names.sort();
    let mut d = Digester::new();
    for path in names {
        let bytes = fs::read(&path).map_err(|source| StoreError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        d.part(&name, &bytes);
    }
    Ok(d.finish())
}

fn check_record(
    file: &str,
    line: usize,
    id: &str,
    image: &Embedding,
    text: Option<&Embedding>,
    image_dim: usize,
    text_dim: usize,
) -> Result<(), StoreError> {
    if !valid_id(id) {
        return Err(StoreError::InvalidId {
            file: file.into(),
            line,
            id: id.into(),
        });
    }
    if image.dim() != image_dim {
        return Err(StoreError::DimensionMismatch {
            file: file.into(),
            line,
            id: id.into(),
            expected: image_dim,
            found: image.dim(),
        });
    }
    if image.norm() == 0.0 {
        return Err(StoreError::ZeroNorm {
            file: file.into(),
            line,
            id: id.into(),
        });
    }
    if let Some(t) = text {
        if t.dim() != text_dim {
            return Err(StoreError::DimensionMismatch {
                file: file.into(),
                line,
                id: id.into(),
                expected: text_dim,
                found: t.dim(),
            });
        }
    }
    Ok(())
}

struct Side<'a> {
    id: &'a str,
    image: &'a Embedding,
    text: Option<&'a Embedding>,
    caption: Option<&'a str>,
    coord: Option<GeoCoord>,
}

fn encode_side(
    files: &mut BTreeMap<String, Vec<u8>>,
    prefix: &str,
    rows: &[Side<'_>],
    image_dim: usize,
    text_dim: usize,
) {
    let mut put_matrix = |name: String, ids: Vec<&str>, matrix: EmbeddingMatrix| {
        let sidecar = ids_path(Path::new(&name)).display().to_string();
        let mut id_text = String::new();
        for id in ids {
            id_text.push_str(id);
            id_text.push('\n');
        }
        files.insert(name, matrix.encode());
        files.insert(sidecar, id_text.into_bytes());
    };
    let image = EmbeddingMatrix {
        dim: image_dim,
        rows: rows.iter().map(|r| r.image.values().to_vec()).collect(),
    };
    put_matrix(
        format!("{prefix}.image.gvlm"),
        rows.iter().map(|r| r.id).collect(),
        image,
    );
    let with_text: Vec<&Side<'_>> = rows.iter().filter(|r| r.text.is_some()).collect();
    let text = EmbeddingMatrix {
        dim: text_dim,
        rows: with_text
            .iter()
            .map(|r| r.text.unwrap().values().to_vec())
            .collect(),
    };
    put_matrix(
        format!("{prefix}.text.gvlm"),
        with_text.iter().map(|r| r.id).collect(),
        text,
    );
    let captions: Vec<CaptionRow> = rows
        .iter()
        .filter_map(|r| {
            r.caption.map(|c| CaptionRow {
                id: r.id.to_string(),
                caption: c.to_string(),
            })
        })
        .collect();
    files.insert(
        format!("{prefix}.captions.jsonl"),
        jsonl::to_string(&captions).into_bytes(),
    );
    let coords: Vec<CoordRow> = rows
        .iter()
        .filter_map(|r| {
            r.coord.map(|c| CoordRow {
                id: r.id.to_string(),
                lat: c.lat,
                lon: c.lon,
            })
        })
        .collect();
    files.insert(
        format!("{prefix}.coords.jsonl"),
        jsonl::to_string(&coords).into_bytes(),
    );
}

struct LoadedSide {
    id: String,
    image: Embedding,
    text: Option<Embedding>,
    caption: Option<String>,
    coord: Option<GeoCoord>,
}

fn load_side(
    dir: &Path,
    prefix: &str,
    manifest: &StoreManifest,
    expected_count: usize,
) -> Result<Vec<LoadedSide>, StoreError> {
    let image_path = dir.join(format!("{prefix}.image.gvlm"));
    let (ids, image) = read_labeled(&image_path)?;
    let file = image_path.display().to_string();
    if ids.len() != expected_count {
        return Err(StoreError::CountMismatch {
            what: file,
            expected: expected_count,
            found: ids.len(),
        });
    }
    if image.dim != manifest.image_dim && !ids.is_empty() {
        return Err(StoreError::DimensionMismatch {
            file,
            line: 1,
            id: ids[0].clone(),
            expected: manifest.image_dim,
            found: image.dim,
        });
    }
    let mut index = HashMap::with_capacity(ids.len());
    let mut out = Vec::with_capacity(ids.len());
    for (row, (id, values)) in ids.into_iter().zip(image.rows).enumerate() {
        let image = Embedding::new(values).map_err(|source| StoreError::BadEmbedding {
            file: file.clone(),
            line: row + 1,
            id: id.clone(),
            source,
        })?;
        if index.insert(id.clone(), row).is_some() {
            return Err(StoreError::DuplicateId {
                file: file.clone(),
                line: row + 1,
                id,
            });
        }
        out.push(LoadedSide {
            id,
            image,
            text: None,
            caption: None,
            coord: None,
        });
    }

    let text_path = dir.join(format!("{prefix}.text.gvlm"));
    let (text_ids, text) = read_labeled(&text_path)?;
    let file = text_path.display().to_string();
    if text.dim != manifest.text_dim && !text_ids.is_empty() {
        return Err(StoreError::DimensionMismatch {
            file,
            line: 1,
            id: text_ids[0].clone(),
            expected: manifest.text_dim,
            found: text.dim,
        });
    }
    for (row, (id, values)) in text_ids.into_iter().zip(text.rows).enumerate() {
        let line = row + 1;
        let Some(&i) = index.get(&id) else {
            return Err(StoreError::UnknownId {
                file: file.clone(),
                line,
                id,
            });
        };
        let emb = Embedding::new(values).map_err(|source| StoreError::BadEmbedding {
            file: file.clone(),
            line,
            id: id.clone(),
            source,
        })?;
        if out[i].text.replace(emb).is_some() {
            return Err(StoreError::DuplicateId { file: file.clone(), line, id });
        }
    }

    let caption_path = dir.join(format!("{prefix}.captions.jsonl"));
    let file = caption_path.display().to_string();
    for (line, row) in jsonl::read::<CaptionRow>(&caption_path)? {
        let Some(&i) = index.get(&row.id) else {
            return Err(StoreError::UnknownId { file, line, id: row.id });
        };
        if out[i].caption.replace(row.caption).is_some() {
            return Err(StoreError::DuplicateId { file, line, id: row.id });
        }
    }

    let coord_path = dir.join(format!("{prefix}.coords.jsonl"));
    let file = coord_path.display().to_string();
    for (line, row) in jsonl::read::<CoordRow>(&coord_path)? {
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
    Ok(out)
}
