//! Retrieval metrics: recall at k, average precision, great-circle distance
//! and recall within a distance threshold, plus baseline-versus-reranked
//! comparison reports.
//!
//! Multi-positive queries count a hit when any positive is retrieved. For
//! per-positive evaluation run over
//! [`EvalInstance`](crate::geostore::EvalInstance)s instead.

mod report;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::geostore::GeoCoord;
use crate::retriever::Ranking;

pub use report::{render_csv, render_svg, write_report, REPORT_CSV, REPORT_JSON, REPORT_SVG};

pub const EARTH_RADIUS_KM: f64 = 6371.0;

pub type GroundTruth = BTreeMap<String, BTreeSet<String>>;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid eval config: {0}")]
    Config(String),
    #[error("ranking for unknown query id {0:?}")]
    UnknownQuery(String),
    #[error("query {0:?} appears more than once")]
    DuplicateQuery(String),
    #[error("no rankings to evaluate")]
    NoQueries,
    #[error("positive set is empty")]
    EmptyPositives,
    #[error("no coordinate for reference {0:?}")]
    MissingCoord(String),
    #[error("query {id:?} is present in the {present} rankings but not the {missing} rankings")]
    QueryMismatch {
        id: String,
        present: &'static str,
        missing: &'static str,
    },
    #[error("recall at depth {k} differs: baseline {baseline}, reranked {reranked}")]
    DepthRecallChanged { k: usize, baseline: f64, reranked: f64 },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl EvalError {
    pub fn is_io(&self) -> bool {
        matches!(self, EvalError::Io { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    pub thresholds_km: Vec<f64>,
    pub earth_radius_km: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            ks: vec![1, 5, 10],
            thresholds_km: vec![0.0, 0.5],
            earth_radius_km: EARTH_RADIUS_KM,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::Config(m.into()));
        if self.ks.is_empty() || self.ks[0] == 0 || self.ks.windows(2).any(|w| w[0] >= w[1]) {
            return bad("ks must be positive and strictly ascending");
        }
        if self.thresholds_km.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return bad("thresholds must be finite and non-negative");
        }
        if !(self.earth_radius_km.is_finite() && self.earth_radius_km > 0.0) {
            return bad("earth radius must be positive");
        }
        Ok(())
    }
}

fn check_queries(rankings: &[Ranking], gt: &GroundTruth) -> Result<(), EvalError> {
    if rankings.is_empty() {
        return Err(EvalError::NoQueries);
    }
    let mut seen = BTreeSet::new();
    for r in rankings {
        if !gt.contains_key(&r.query_id) {
            return Err(EvalError::UnknownQuery(r.query_id.clone()));
        }
        if !seen.insert(r.query_id.as_str()) {
            return Err(EvalError::DuplicateQuery(r.query_id.clone()));
        }
    }
    Ok(())
}

fn hit_at_k(ranking: &Ranking, positives: &BTreeSet<String>, k: usize) -> bool {
    ranking.entries.iter().take(k).any(|e| positives.contains(&e.reference_id))
}

/// Fraction of queries with any ground-truth reference in the first `k`
/// entries. Rankings shorter than `k` simply have fewer chances.
pub fn recall_at_k(rankings: &[Ranking], gt: &GroundTruth, k: usize) -> Result<f64, EvalError> {
    check_queries(rankings, gt)?;
    let hits = rankings
        .iter()
        .filter(|r| hit_at_k(r, &gt[&r.query_id], k))
        .count();
    Ok(hits as f64 / rankings.len() as f64)
}

/// Mean over positives of the precision at each positive's rank. Positives
/// absent from the ranking contribute zero.
pub fn average_precision(ranking: &Ranking, positives: &BTreeSet<String>) -> Result<f64, EvalError> {
    if positives.is_empty() {
        return Err(EvalError::EmptyPositives);
    }
    let mut found = 0usize;
    let mut sum = 0.0;
    for (i, e) in ranking.entries.iter().enumerate() {
        if positives.contains(&e.reference_id) {
            found += 1;
            sum += found as f64 / (i + 1) as f64;
        }
    }
    Ok(sum / positives.len() as f64)
}

pub fn mean_average_precision(rankings: &[Ranking], gt: &GroundTruth) -> Result<f64, EvalError> {
    check_queries(rankings, gt)?;
    let mut total = 0.0;
    for r in rankings {
        total += average_precision(r, &gt[&r.query_id])?;
    }
    Ok(total / rankings.len() as f64)
}

/// Great-circle distance in the units of `radius`.
pub fn haversine(p: GeoCoord, q: GeoCoord, radius: f64) -> f64 {
    let (phi1, phi2) = (p.lat.to_radians(), q.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (q.lon - p.lon).to_radians();
    let a = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * radius * a.sqrt().min(1.0).asin()
}

/// Fraction of queries where some top-`k` reference lies within
/// `threshold_km` (inclusive) of the true location, taken as the coordinate
/// of any ground-truth reference.
pub fn threshold_recall(
    rankings: &[Ranking],
    coords: &HashMap<String, GeoCoord>,
    gt: &GroundTruth,
    threshold_km: f64,
    k: usize,
    radius: f64,
) -> Result<f64, EvalError> {
    check_queries(rankings, gt)?;
    let coord = |id: &String| coords.get(id).copied().ok_or_else(|| EvalError::MissingCoord(id.clone()));
    let mut hits = 0usize;
    for r in rankings {
        let truth = gt[&r.query_id].iter().map(coord).collect::<Result<Vec<_>, _>>()?;
        let mut hit = false;
        for e in r.entries.iter().take(k) {
            let c = coord(&e.reference_id)?;
            if truth.iter().any(|&t| haversine(c, t, radius) <= threshold_km) {
                hit = true;
                break;
            }
        }
        hits += usize::from(hit);
    }
    Ok(hits as f64 / rankings.len() as f64)
}

/// Baseline value, optional reranked value and their difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub baseline: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reranked: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl Metric {
    fn new(baseline: f64, reranked: Option<f64>) -> Self {
        Self {
            baseline,
            reranked,
            delta: reranked.map(|r| r - baseline),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallAtK {
    pub k: usize,
    #[serde(flatten)]
    pub value: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRecall {
    pub threshold_km: f64,
    pub k: usize,
    #[serde(flatten)]
    pub value: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub query_count: usize,
    /// Queries with no positive in the retrieved list; reranking cannot
    /// recover them, but they still count as misses.
    pub skipped_count: usize,
    /// Retrieval depth: the longest baseline ranking.
    pub depth: usize,
    pub recall: Vec<RecallAtK>,
    pub mean_ap: Metric,
    pub threshold_recall: Vec<ThresholdRecall>,
}

fn by_query(rankings: &[Ranking]) -> BTreeMap<&str, &Ranking> {
    rankings.iter().map(|r| (r.query_id.as_str(), r)).collect()
}

/// Metrics for one set of rankings, or a side-by-side comparison when
/// `reranked` is given. Threshold recalls are computed only when `coords` is
/// non-empty. A comparison fails if recall at the retrieval depth differs,
/// since reranking only permutes the retrieved candidates.
pub fn compare_rankings(
    baseline: &[Ranking],
    reranked: Option<&[Ranking]>,
    gt: &GroundTruth,
    coords: &HashMap<String, GeoCoord>,
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    config.validate()?;
    check_queries(baseline, gt)?;
    // Canonical query order so the report does not depend on input order.
    let base_map = by_query(baseline);
    let base: Vec<Ranking> = base_map.values().map(|r| (*r).clone()).collect();
    let rer: Option<Vec<Ranking>> = match reranked {
        None => None,
        Some(rs) => {
            check_queries(rs, gt)?;
            let map = by_query(rs);
            for id in base_map.keys() {
                if !map.contains_key(id) {
                    return Err(EvalError::QueryMismatch {
                        id: id.to_string(),
                        present: "baseline",
                        missing: "reranked",
                    });
                }
            }
            for id in map.keys() {
                if !base_map.contains_key(id) {
                    return Err(EvalError::QueryMismatch {
                        id: id.to_string(),
                        present: "reranked",
                        missing: "baseline",
                    });
                }
            }
            Some(map.values().map(|r| (*r).clone()).collect())
        }
    };
    let rer = rer.as_deref();

    let depth = base.iter().map(|r| r.entries.len()).max().unwrap_or(0);
    if let Some(rs) = rer {
        let b = recall_at_k(&base, gt, depth)?;
        let r = recall_at_k(rs, gt, depth)?;
        if b.to_bits() != r.to_bits() {
            return Err(EvalError::DepthRecallChanged {
                k: depth,
                baseline: b,
                reranked: r,
            });
        }
    }

    let both = |f: &dyn Fn(&[Ranking]) -> Result<f64, EvalError>| -> Result<Metric, EvalError> {
        Ok(Metric::new(f(&base)?, rer.map(f).transpose()?))
    };

    let mut recall = Vec::new();
    for &k in &config.ks {
        recall.push(RecallAtK {
            k,
            value: both(&|rs| recall_at_k(rs, gt, k))?,
        });
    }
    let mean_ap = both(&|rs| mean_average_precision(rs, gt))?;
    let mut thresholds = Vec::new();
    if !coords.is_empty() {
        for &t in &config.thresholds_km {
            for &k in &config.ks {
                thresholds.push(ThresholdRecall {
                    threshold_km: t,
                    k,
                    value: both(&|rs| threshold_recall(rs, coords, gt, t, k, config.earth_radius_km))?,
                });
            }
        }
    }
    let skipped_count = base
        .iter()
        .filter(|r| !hit_at_k(r, &gt[&r.query_id], usize::MAX))
        .count();
    Ok(EvalReport {
        query_count: base.len(),
        skipped_count,
        depth,
        recall,
        mean_ap,
        threshold_recall: thresholds,
    })
}
