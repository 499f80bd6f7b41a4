//! `GVCK` checkpoint files.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! b"GVCK" | version (=1) | meta_len | meta (key=value lines, UTF-8)
//! | tensor_count | per tensor: name_len | name | rank | dims... | f32 payload
//! ```
//!
//! The meta block carries the reranker configuration. Extra tensors (for
//! example optimizer moments) use the same framing under their own names.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::digest::sha256_hex;

use super::params::RerankerParams;
use super::{RerankError, RerankerConfig};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"GVCK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic bytes (expected \"GVCK\")")]
    BadMagic,
    #[error("checkpoint version {0} is not supported (expected {CHECKPOINT_VERSION})")]
    VersionMismatch(u32),
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error("checkpoint is missing tensor {0:?}")]
    MissingTensor(String),
    #[error("tensor {name:?} has shape {found:?}, expected {expected:?}")]
    TensorShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("checkpoint has unexpected tensor {0:?}")]
    UnexpectedTensor(String),
    #[error("tensor {0:?} holds non-finite values")]
    NonFinite(String),
}

impl CheckpointError {
    pub fn is_io(&self) -> bool {
        matches!(self, CheckpointError::Io { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CheckpointFile {
    pub meta: BTreeMap<String, String>,
    pub tensors: Vec<NamedTensor>,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("fits in u32").to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(CheckpointError::Truncated(self.bytes.len()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, CheckpointError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn utf8(&mut self, n: usize) -> Result<&'a str, CheckpointError> {
        std::str::from_utf8(self.take(n)?)
            .map_err(|_| CheckpointError::Malformed("invalid UTF-8".into()))
    }
}

impl CheckpointFile {
    pub fn tensor(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        put_u32(&mut out, CHECKPOINT_VERSION as usize);
        let meta: String = self.meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        put_u32(&mut out, meta.len());
        out.extend_from_slice(meta.as_bytes());
        put_u32(&mut out, self.tensors.len());
        for t in &self.tensors {
            put_u32(&mut out, t.name.len());
            out.extend_from_slice(t.name.as_bytes());
            put_u32(&mut out, t.shape.len());
            for &d in &t.shape {
                put_u32(&mut out, d);
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4).map_err(|_| CheckpointError::BadMagic)? != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION as usize {
            return Err(CheckpointError::VersionMismatch(version as u32));
        }
        let meta_len = r.u32()?;
        let mut meta = BTreeMap::new();
        for line in r.utf8(meta_len)?.lines().filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CheckpointError::Malformed(format!("meta line {line:?}")))?;
            meta.insert(k.to_string(), v.to_string());
        }
        let count = r.u32()?;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name_len = r.u32()?;
            let name = r.utf8(name_len)?.to_string();
            let rank = r.u32()?;
            let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
            let n = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| CheckpointError::Malformed(format!("tensor {name:?} too large")))?;
            let data = r
                .take(n)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            tensors.push(NamedTensor { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err(CheckpointError::TrailingBytes(bytes.len() - r.pos));
        }
        Ok(Self { meta, tensors })
    }

    pub fn write(&self, path: &Path) -> Result<(), CheckpointError> {
        fs::write(path, self.encode()).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::decode(&bytes)
    }
}

impl RerankerParams<f32> {
    pub fn to_checkpoint(&self) -> CheckpointFile {
        CheckpointFile {
            meta: self.config.to_kv().into_iter().collect(),
            tensors: self
                .tensors()
                .into_iter()
                .map(|(name, shape, data)| NamedTensor {
                    name,
                    shape,
                    data: data.to_vec(),
                })
                .collect(),
        }
    }

    /// Rebuilds parameters from a checkpoint. Tensors under `optim.` are
    /// ignored; any other unknown tensor is an error.
    pub fn from_checkpoint(file: &CheckpointFile) -> Result<Self, RerankError> {
        let config = RerankerConfig::from_kv(file.meta.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
        let mut params = Self::zeros(&config)?;
        let expected: Vec<(String, Vec<usize>)> = params
            .tensors()
            .into_iter()
            .map(|(n, s, _)| (n, s))
            .collect();
        for t in &file.tensors {
            if !t.name.starts_with("optim.") && !expected.iter().any(|(n, _)| n == &t.name) {
                return Err(CheckpointError::UnexpectedTensor(t.name.clone()).into());
            }
        }
        for ((name, dst), (_, shape)) in params.tensors_mut().into_iter().zip(&expected) {
            let t = file
                .tensor(&name)
                .ok_or_else(|| CheckpointError::MissingTensor(name.clone()))?;
            if &t.shape != shape {
                return Err(CheckpointError::TensorShape {
                    name,
                    expected: shape.clone(),
                    found: t.shape.clone(),
                }
                .into());
            }
            if t.data.iter().any(|v| !v.is_finite()) {
                return Err(CheckpointError::NonFinite(name).into());
            }
            dst.copy_from_slice(&t.data);
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<(), RerankError> {
        Ok(self.to_checkpoint().write(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, RerankError> {
        Self::from_checkpoint(&CheckpointFile::read(path)?)
    }

    /// SHA-256 of the parameters-only checkpoint encoding.
    pub fn digest(&self) -> String {
        sha256_hex(&self.to_checkpoint().encode())
    }
}
