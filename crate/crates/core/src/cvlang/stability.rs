use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::render::Description;
use super::LangError;
use crate::geostore::Embedding;
use crate::retriever::cosine;

/// Case-folded words with leading and trailing punctuation stripped.
/// Tokens without any alphanumeric character are dropped.
pub fn words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Jaccard similarity of the two texts' word sets; 1.0 when both are empty.
pub fn jaccard(a: &str, b: &str) -> f64 {
    let a: BTreeSet<String> = words(a).into_iter().collect();
    let b: BTreeSet<String> = words(b).into_iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// Agreement between two description runs over the same images.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub count: usize,
    pub mean_cosine: f64,
    pub mean_jaccard: f64,
    /// Mean description length in words over both runs.
    pub mean_length: f64,
    /// Population standard deviation of description length over both runs.
    pub length_std: f64,
}

/// Compares two description corpora. Each corpus is paired index-by-index
/// with its embeddings; the corpora themselves are matched by image id.
pub fn stability_report(
    corpus_a: &[Description],
    corpus_b: &[Description],
    embeddings_a: &[Embedding],
    embeddings_b: &[Embedding],
) -> Result<StabilityReport, LangError> {
    for (texts, embs) in [(corpus_a, embeddings_a), (corpus_b, embeddings_b)] {
        if texts.len() != embs.len() {
            return Err(LangError::LengthMismatch {
                texts: texts.len(),
                embeddings: embs.len(),
            });
        }
    }
    let index_b: BTreeMap<&str, usize> = corpus_b
        .iter()
        .enumerate()
        .map(|(i, d)| (d.image_id.as_str(), i))
        .collect();
    let index_a: BTreeSet<&str> = corpus_a.iter().map(|d| d.image_id.as_str()).collect();
    if let Some(id) = corpus_b
        .iter()
        .map(|d| d.image_id.as_str())
        .find(|id| !index_a.contains(id))
    {
        return Err(LangError::IdMismatch { id: id.into() });
    }
    if index_b.len() != corpus_b.len() || index_a.len() != corpus_a.len() {
        return Err(LangError::LengthMismatch {
            texts: corpus_a.len(),
            embeddings: corpus_b.len(),
        });
    }

    let mut cos_sum = 0.0;
    let mut jac_sum = 0.0;
    for (a, emb_a) in corpus_a.iter().zip(embeddings_a) {
        let Some(&j) = index_b.get(a.image_id.as_str()) else {
            return Err(LangError::IdMismatch {
                id: a.image_id.clone(),
            });
        };
        cos_sum += cosine(emb_a, &embeddings_b[j]).map_err(|e| {
            LangError::BadResponse(format!("image {:?}: {e}", a.image_id))
        })?;
        jac_sum += jaccard(&a.description, &corpus_b[j].description);
    }
    let n = corpus_a.len();
    let lengths: Vec<f64> = corpus_a
        .iter()
        .chain(corpus_b)
        .map(|d| words(&d.description).len() as f64)
        .collect();
    let (mean_length, length_std) = if lengths.is_empty() {
        (0.0, 0.0)
    } else {
        let mean = lengths.iter().sum::<f64>() / lengths.len() as f64;
        let var = lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / lengths.len() as f64;
        (mean, var.sqrt())
    };
    let mean = |s: f64| if n == 0 { 0.0 } else { s / n as f64 };
    Ok(StabilityReport {
        count: n,
        mean_cosine: mean(cos_sum),
        mean_jaccard: mean(jac_sum),
        mean_length,
        length_std,
    })
}
