//! Binary embedding matrices.
//!
//! Layout, all little-endian:
//!
//! ```text
//! b"GVLM" | u32 format_version (=1) | u32 dim | u64 count | count*dim f32
//! ```
//!
//! Row ids live in a sidecar text file with one id per line, in row order.

use std::fs;
use std::path::{Path, PathBuf};

use super::types::valid_id;

pub const MATRIX_MAGIC: &[u8; 4] = b"GVLM";
pub const MATRIX_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8;

#[derive(Debug, thiserror::Error)]
pub enum MatrixError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic bytes (expected \"GVLM\")")]
    BadMagic { path: String },
    #[error("{path}: format version {found} is not supported (expected {MATRIX_VERSION})")]
    VersionMismatch { path: String, found: u32 },
    #[error("{path}: truncated payload: expected {expected} bytes, found {found}")]
    Truncated {
        path: String,
        expected: u64,
        found: u64,
    },
    #[error("{path}: {extra} unexpected trailing bytes")]
    TrailingBytes { path: String, extra: u64 },
    #[error("row {row} has dim {found}, matrix dim is {expected}")]
    RaggedRows {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}: sidecar has {found} ids for {expected} rows")]
    IdCount {
        path: String,
        expected: usize,
        found: usize,
    },
    #[error("{path}:{line}: invalid id {id:?}")]
    InvalidId {
        path: String,
        line: usize,
        id: String,
    },
}

impl MatrixError {
    pub fn is_io(&self) -> bool {
        matches!(self, MatrixError::Io { .. })
    }
}

/// A dense row-major `f32` matrix as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub dim: usize,
    pub rows: Vec<Vec<f32>>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, rows: Vec<Vec<f32>>) -> Result<Self, MatrixError> {
        if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(MatrixError::RaggedRows {
                row,
                expected: dim,
                found: r.len(),
            });
        }
        Ok(Self { dim, rows })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.rows.len() * self.dim * 4);
        out.extend_from_slice(MATRIX_MAGIC);
        out.extend_from_slice(&MATRIX_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.rows.len() as u64).to_le_bytes());
        for row in &self.rows {
            for v in row {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Decodes a full file image. `path` is only used in error messages.
    /// Nothing is returned unless the whole payload is present.
    pub fn decode(bytes: &[u8], path: &str) -> Result<Self, MatrixError> {
        let truncated = |expected: u64| MatrixError::Truncated {
            path: path.to_string(),
            expected,
            found: bytes.len() as u64,
        };
        if bytes.len() < 4 {
            return Err(if MATRIX_MAGIC.starts_with(bytes) {
                truncated(HEADER_LEN as u64)
            } else {
                MatrixError::BadMagic { path: path.into() }
            });
        }
        if &bytes[..4] != MATRIX_MAGIC {
            return Err(MatrixError::BadMagic { path: path.into() });
        }
        if bytes.len() < HEADER_LEN {
            return Err(truncated(HEADER_LEN as u64));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != MATRIX_VERSION {
            return Err(MatrixError::VersionMismatch {
                path: path.into(),
                found: version,
            });
        }
        let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let expected = (count as u128) * (dim as u128) * 4 + HEADER_LEN as u128;
        let expected = u64::try_from(expected).unwrap_or(u64::MAX);
        if (bytes.len() as u64) < expected {
            return Err(truncated(expected));
        }
        if (bytes.len() as u64) > expected {
            return Err(MatrixError::TrailingBytes {
                path: path.into(),
                extra: bytes.len() as u64 - expected,
            });
        }
        let payload = &bytes[HEADER_LEN..];
        let rows = if dim == 0 {
            vec![Vec::new(); count as usize]
        } else {
            payload
                .chunks_exact(dim * 4)
                .map(|row| {
                    row.chunks_exact(4)
                        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                        .collect()
                })
                .collect()
        };
        Ok(Self { dim, rows })
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MatrixError + '_ {
    move |source| MatrixError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Sidecar id path for a matrix file: `<path>` with its extension replaced
/// by `ids`.
pub fn ids_path(path: &Path) -> PathBuf {
    path.with_extension("ids")
}

pub fn write_embedding_matrix(path: &Path, matrix: &EmbeddingMatrix) -> Result<(), MatrixError> {
    fs::write(path, matrix.encode()).map_err(io_err(path))
}

pub fn read_embedding_matrix(path: &Path) -> Result<EmbeddingMatrix, MatrixError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    EmbeddingMatrix::decode(&bytes, &path.display().to_string())
}

/// Writes a matrix with its id sidecar.
pub fn write_labeled(path: &Path, ids: &[&str], matrix: &EmbeddingMatrix) -> Result<(), MatrixError> {
    if ids.len() != matrix.rows.len() {
        return Err(MatrixError::IdCount {
            path: ids_path(path).display().to_string(),
            expected: matrix.rows.len(),
            found: ids.len(),
        });
    }
    write_embedding_matrix(path, matrix)?;
    let sidecar = ids_path(path);
    let mut text = String::new();
    for id in ids {
        text.push_str(id);
        text.push('\n');
    }
    fs::write(&sidecar, text).map_err(io_err(&sidecar))
}

pub fn read_labeled(path: &Path) -> Result<(Vec<String>, EmbeddingMatrix), MatrixError> {
    let matrix = read_embedding_matrix(path)?;
    let sidecar = ids_path(path);
    let text = fs::read_to_string(&sidecar).map_err(io_err(&sidecar))?;
    let ids: Vec<String> = text.lines().map(str::to_owned).collect();
    if let Some((idx, id)) = ids.iter().enumerate().find(|(_, id)| !valid_id(id)) {
        return Err(MatrixError::InvalidId {
            path: sidecar.display().to_string(),
            line: idx + 1,
            id: id.clone(),
        });
    }
    if ids.len() != matrix.rows.len() {
        return Err(MatrixError::IdCount {
            path: sidecar.display().to_string(),
            expected: matrix.rows.len(),
            found: ids.len(),
        });
    }
    Ok((ids, matrix))
}
