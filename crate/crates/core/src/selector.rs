//! Picks at most one table answer for a query from its scored candidates.

use serde::{Deserialize, Serialize};

use crate::classifier::{predict, BoostedModel};
use crate::extraction::TableKey;
use crate::features::FeatureVector;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub key: TableKey,
    pub score: f64,
    /// Best score minus the runner-up's; `None` with a single candidate.
    pub margin: Option<f64>,
}

pub fn check_threshold(theta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&theta) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "threshold {theta} outside [0, 1]"
        )))
    }
}

/// Highest score first; equal scores fall back to lower `(doc_rank,
/// table_index)`.
pub fn rank_order(a: &(TableKey, f64), b: &(TableKey, f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Returns the argmax candidate when its score is strictly above `theta`.
pub fn select_scored(scored: &[(TableKey, f64)], theta: f64) -> Option<Selection> {
    let mut best: Option<&(TableKey, f64)> = None;
    let mut second: Option<&(TableKey, f64)> = None;
    for c in scored {
        if best.map_or(true, |b| rank_order(c, b).is_lt()) {
            second = best;
            best = Some(c);
        } else if second.map_or(true, |s| rank_order(c, s).is_lt()) {
            second = Some(c);
        }
    }
    let (key, score) = *best?;
    (score > theta).then(|| Selection {
        key,
        score,
        margin: second.map(|s| score - s.1),
    })
}

pub fn score_candidates(
    candidates: &[&FeatureVector],
    model: &BoostedModel,
) -> Result<Vec<(TableKey, f64)>> {
    candidates
        .iter()
        .map(|fv| {
            Ok((
                TableKey {
                    doc_rank: fv.key.doc_rank,
                    table_index: fv.key.table_index,
                },
                predict(model, fv)?,
            ))
        })
        .collect()
}

pub fn select(
    candidates: &[&FeatureVector],
    model: &BoostedModel,
    theta: f64,
) -> Result<Option<Selection>> {
    check_threshold(theta)?;
    Ok(select_scored(&score_candidates(candidates, model)?, theta))
}
