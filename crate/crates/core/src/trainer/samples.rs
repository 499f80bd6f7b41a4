use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geostore::{build_eval_instances, GeoStore};
use crate::jsonl::{self, JsonlError};
use crate::retriever::Ranking;

use super::TrainError;

/// A query, its retrieved candidates and which candidate is the match.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub query_id: String,
    pub candidate_ids: Vec<String>,
    pub positive_index: usize,
}

impl TrainingSample {
    pub fn positive_id(&self) -> &str {
        &self.candidate_ids[self.positive_index]
    }

    /// Structural checks: at least one negative, index in range, no
    /// repeated candidates.
    pub fn check(&self) -> Result<(), TrainError> {
        let bad = |m: String| TrainError::BadSample {
            query_id: self.query_id.clone(),
            message: m,
        };
        if self.candidate_ids.len() < 2 {
            return Err(bad("needs a positive and at least one negative".into()));
        }
        if self.positive_index >= self.candidate_ids.len() {
            return Err(bad(format!(
                "positive_index {} out of range for {} candidates",
                self.positive_index,
                self.candidate_ids.len()
            )));
        }
        let unique: BTreeSet<&String> = self.candidate_ids.iter().collect();
        if unique.len() != self.candidate_ids.len() {
            return Err(bad("repeated candidate id".into()));
        }
        Ok(())
    }

    /// Canonical ordering key; batch sums follow it so the result does not
    /// depend on the order samples arrive in.
    pub(crate) fn sort_key(&self) -> (&str, &str) {
        (&self.query_id, self.positive_id())
    }
}

/// How labelled semi-positives are treated when building candidate lists.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SamplePolicy {
    /// Semi-positives stay in the list as ordinary negatives.
    #[default]
    KeepSemiPositives,
    /// Semi-positives are removed from the list.
    DropSemiPositives,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    pub samples: Vec<TrainingSample>,
    /// Instances whose positive was not among the retrieved candidates.
    pub skipped: usize,
}

/// One sample per (query, positive) whose positive appears in the query's
/// ranking. Multi-positive queries are first expanded so each instance has
/// exactly one positive, with the other positives removed from its list.
pub fn build_training_samples(
    store: &GeoStore,
    rankings: &[Ranking],
    policy: SamplePolicy,
) -> Result<SampleSet, TrainError> {
    let mut out = SampleSet::default();
    for ranking in rankings {
        let query = store
            .query(&ranking.query_id)
            .ok_or_else(|| TrainError::UnknownQuery(ranking.query_id.clone()))?;
        let instances = build_eval_instances(query, store).map_err(|e| TrainError::BadSample {
            query_id: query.id.clone(),
            message: e.to_string(),
        })?;
        for inst in instances {
            let candidate_ids: Vec<String> = ranking
                .ids()
                .filter(|id| inst.candidate_pool.contains(*id))
                .filter(|id| {
                    policy == SamplePolicy::KeepSemiPositives || !query.semi_positives.contains(*id)
                })
                .map(str::to_string)
                .collect();
            match candidate_ids.iter().position(|id| *id == inst.positive_id) {
                Some(positive_index) if candidate_ids.len() >= 2 => out.samples.push(TrainingSample {
                    query_id: query.id.clone(),
                    candidate_ids,
                    positive_index,
                }),
                _ => out.skipped += 1,
            }
        }
    }
    Ok(out)
}

pub fn write_samples(path: &Path, samples: &[TrainingSample]) -> Result<(), JsonlError> {
    jsonl::write(path, samples)
}

pub fn read_samples(path: &Path) -> Result<Vec<TrainingSample>, JsonlError> {
    Ok(jsonl::read(path)?.into_iter().map(|(_, s)| s).collect())
}
