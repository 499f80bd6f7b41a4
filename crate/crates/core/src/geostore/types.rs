use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A WGS84 latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoCoord {
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("coordinate ({lat}, {lon}) outside lat [-90, 90] / lon [-180, 180]")]
pub struct CoordRangeError {
    pub lat: f64,
    pub lon: f64,
}

impl GeoCoord {
    pub fn new(lat: f64, lon: f64) -> Result<Self, CoordRangeError> {
        let ok = lat.is_finite()
            && lon.is_finite()
            && (-90.0..=90.0).contains(&lat)
            && (-180.0..=180.0).contains(&lon);
        if ok {
            Ok(Self { lat, lon })
        } else {
            Err(CoordRangeError { lat, lon })
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbeddingError {
    #[error("embedding is empty")]
    Empty,
    #[error("embedding value at index {index} is not finite")]
    NonFinite { index: usize },
}

/// A finite, non-empty `f32` embedding. Its dimension is its length.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f32>);

impl Embedding {
    pub fn new(values: Vec<f32>) -> Result<Self, EmbeddingError> {
        if values.is_empty() {
            return Err(EmbeddingError::Empty);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite { index });
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f32> {
        self.0
    }

    /// Euclidean norm accumulated in `f64`.
    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt()
    }
}

impl AsRef<[f32]> for Embedding {
    fn as_ref(&self) -> &[f32] {
        &self.0
    }
}

/// A geo-tagged satellite reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRecord {
    pub id: String,
    pub image: Embedding,
    pub text: Option<Embedding>,
    pub caption: Option<String>,
    pub coord: Option<GeoCoord>,
}

/// A ground-level query and the references that match it.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub id: String,
    pub image: Embedding,
    pub text: Option<Embedding>,
    pub caption: Option<String>,
    pub coord: Option<GeoCoord>,
    pub ground_truth: BTreeSet<String>,
    /// References that overlap the true location without being the match.
    /// Empty unless the dataset labels them.
    pub semi_positives: BTreeSet<String>,
}

/// Ids are opaque; they only need to survive the line-oriented sidecar
/// files, so tabs, newlines and other control characters are refused.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.chars().any(char::is_control)
}

/// Header describing a persisted store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreManifest {
    pub format_version: u32,
    pub image_dim: usize,
    pub text_dim: usize,
    pub reference_count: usize,
    pub query_count: usize,
}

pub const STORE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("manifest line {line}: {message}")]
pub struct ManifestError {
    pub line: usize,
    pub message: String,
}

impl StoreManifest {
    pub fn new(image_dim: usize, text_dim: usize, reference_count: usize, query_count: usize) -> Self {
        Self {
            format_version: STORE_FORMAT_VERSION,
            image_dim,
            text_dim,
            reference_count,
            query_count,
        }
    }

    /// Parses the plain-text `key=value` form. Blank lines and `#` comments
    /// are ignored; unknown and missing keys are errors.
    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        let mut version = None;
        let mut image_dim = None;
        let mut text_dim = None;
        let mut refs = None;
        let mut queries = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            let err = |message: String| ManifestError { line, message };
            let (key, value) = raw
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got {raw:?}")))?;
            let value = value.trim();
            let number = || {
                value
                    .parse::<usize>()
                    .map_err(|_| err(format!("{} must be a non-negative integer", key.trim())))
            };
            match key.trim() {
                "format_version" => version = Some(number()? as u32),
                "image_dim" => image_dim = Some(number()?),
                "text_dim" => text_dim = Some(number()?),
                "reference_count" => refs = Some(number()?),
                "query_count" => queries = Some(number()?),
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        let missing = |name: &str| ManifestError {
            line: 0,
            message: format!("missing key {name:?}"),
        };
        let manifest = Self {
            format_version: version.ok_or_else(|| missing("format_version"))?,
            image_dim: image_dim.ok_or_else(|| missing("image_dim"))?,
            text_dim: text_dim.ok_or_else(|| missing("text_dim"))?,
            reference_count: refs.ok_or_else(|| missing("reference_count"))?,
            query_count: queries.ok_or_else(|| missing("query_count"))?,
        };
        if manifest.format_version != STORE_FORMAT_VERSION {
            return Err(ManifestError {
                line: 0,
                message: format!(
                    "unsupported format_version {} (expected {STORE_FORMAT_VERSION})",
                    manifest.format_version
                ),
            });
        }
        if manifest.image_dim == 0 || manifest.text_dim == 0 {
            return Err(ManifestError {
                line: 0,
                message: "image_dim and text_dim must be positive".into(),
            });
        }
        Ok(manifest)
    }
}

impl fmt::Display for StoreManifest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "format_version={}", self.format_version)?;
        writeln!(f, "image_dim={}", self.image_dim)?;
        writeln!(f, "text_dim={}", self.text_dim)?;
        writeln!(f, "reference_count={}", self.reference_count)?;
        writeln!(f, "query_count={}", self.query_count)
    }
}

/// One single-positive evaluation instance of a multi-positive query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalInstance {
    pub query_id: String,
    pub candidate_pool: BTreeSet<String>,
    pub positive_id: String,
}
