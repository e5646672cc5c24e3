//! Precision and recall of the classifier (per pair, threshold alpha) and of
//! the selector (per query, threshold theta), plus curve export.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::extraction::TableKey;
use crate::selector::select_scored;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// 1.0 when nothing was predicted positive.
    pub precision: f64,
    /// 0.0 when there is nothing to recall.
    pub recall: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

impl PrPoint {
    pub fn new(threshold: f64, tp: usize, fp: usize, fn_: usize) -> Self {
        let precision_undefined = tp + fp == 0;
        let recall_undefined = tp + fn_ == 0;
        PrPoint {
            threshold,
            tp,
            fp,
            fn_,
            precision: if precision_undefined {
                1.0
            } else {
                tp as f64 / (tp + fp) as f64
            },
            recall: if recall_undefined {
                0.0
            } else {
                tp as f64 / (tp + fn_) as f64
            },
            precision_undefined,
            recall_undefined,
        }
    }
}

/// `{0.00, 0.01, ..., 1.00}`.
pub fn default_thresholds() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

/// Counts per threshold over `(score, label)` pairs; true negatives are not
/// counted.
pub fn classifier_pr(scored: &[(f64, bool)], thresholds: &[f64]) -> Vec<PrPoint> {
    thresholds
        .iter()
        .map(|&alpha| {
            let (mut tp, mut fp, mut fn_) = (0, 0, 0);
            for &(score, label) in scored {
                match (score >= alpha, label) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => {}
                }
            }
            PrPoint::new(alpha, tp, fp, fn_)
        })
        .collect()
}

/// One query's candidates with their scores and true labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryCandidates {
    pub query_id: String,
    pub candidates: Vec<ScoredCandidate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub key: TableKey,
    pub score: f64,
    pub label: bool,
}

/// A returned positive pair is a true positive, a returned negative a false
/// positive, and no return for a query that has a positive pair a false
/// negative.
pub fn selector_pr(queries: &[QueryCandidates], thresholds: &[f64]) -> Vec<PrPoint> {
    let scored: Vec<Vec<(TableKey, f64)>> = queries
        .iter()
        .map(|q| q.candidates.iter().map(|c| (c.key, c.score)).collect())
        .collect();
    thresholds
        .iter()
        .map(|&theta| {
            let (mut tp, mut fp, mut fn_) = (0, 0, 0);
            for (q, s) in queries.iter().zip(&scored) {
                match select_scored(s, theta) {
                    Some(sel) => {
                        let label = q.candidates.iter().any(|c| c.key == sel.key && c.label);
                        if label {
                            tp += 1;
                        } else {
                            fp += 1;
                        }
                    }
                    None if q.candidates.iter().any(|c| c.label) => fn_ += 1,
                    None => {}
                }
            }
            PrPoint::new(theta, tp, fp, fn_)
        })
        .collect()
}

/// Highest recall among points whose precision is defined and at least
/// `min_precision`; 0 when none qualifies.
pub fn recall_at_precision(points: &[PrPoint], min_precision: f64) -> f64 {
    points
        .iter()
        .filter(|p| !p.precision_undefined && p.precision >= min_precision)
        .map(|p| p.recall)
        .fold(0.0, f64::max)
}

/// Area under the ROC curve as the probability that a random positive
/// outscores a random negative, ties counting half. `None` without both
/// classes.
pub fn roc_auc(scored: &[(f64, bool)]) -> Option<f64> {
    let mut sorted: Vec<(f64, bool)> = scored.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let positives = sorted.iter().filter(|s| s.1).count();
    let negatives = sorted.len() - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }
    let mut wins = 0.0;
    let mut negatives_below = 0usize;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            j += 1;
        }
        let group = &sorted[i..j];
        let pos = group.iter().filter(|s| s.1).count();
        let neg = group.len() - pos;
        wins += pos as f64 * (negatives_below as f64 + 0.5 * neg as f64);
        negatives_below += neg;
        i = j;
    }
    Some(wins / (positives as f64 * negatives as f64))
}

#[derive(Serialize)]
struct CsvRow {
    threshold: f64,
    tp: usize,
    fp: usize,
    #[serde(rename = "fn")]
    fn_: usize,
    precision: f64,
    recall: f64,
}

pub fn write_curve_csv<W: Write>(points: &[PrPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(CsvRow {
            threshold: p.threshold,
            tp: p.tp,
            fp: p.fp,
            fn_: p.fn_,
            precision: p.precision,
            recall: p.recall,
        })?;
    }
    w.flush().map_err(|e| crate::Error::io("<csv>", e))?;
    Ok(())
}

pub fn curve_json(points: &[PrPoint]) -> Result<String> {
    Ok(serde_json::to_string_pretty(points)?)
}
