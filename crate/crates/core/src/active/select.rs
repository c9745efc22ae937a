use serde::{Deserialize, Serialize};

use super::config::Strategy;
use super::sets::LabeledSets;
use crate::simsearch::{percentile_threshold, sim_metric, BitVector, SimilarityMetric};
use crate::{Error, Result};

/// Candidate rows for one round of queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Score threshold over the unlabeled rows.
    pub tau: f64,
    /// At most `Q` unlabeled rows with score strictly above τ, highest first.
    pub candidates: Vec<usize>,
}

/// Realised similarity threshold of one anchor row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorThreshold {
    pub anchor: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    /// Union of the per-anchor neighbourhoods, ascending.
    pub rows: Vec<usize>,
    pub thresholds: Vec<AnchorThreshold>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Prioritization {
    /// Confirmed anomalies then their neighbours, each block by descending score.
    pub rows: Vec<usize>,
    pub thresholds: Vec<AnchorThreshold>,
}

/// Descending score, ties by ascending row index.
fn by_score_desc(scores: &[f64]) -> impl Fn(&usize, &usize) -> std::cmp::Ordering + '_ {
    move |&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
}

/// Picks the next query batch. Returns `None` when every row is labeled.
pub fn select_candidates(scores: &[f64], sets: &LabeledSets, percentile: f64, budget: usize) -> Result<Option<Selection>> {
    if scores.len() != sets.len() {
        return Err(Error::dim(
            "select_candidates",
            format!("{} scores for {} rows", scores.len(), sets.len()),
        ));
    }
    if budget == 0 {
        return Err(Error::InvalidArgument("query budget must be at least 1".into()));
    }
    let unlabeled = sets.unlabeled();
    if unlabeled.is_empty() {
        return Ok(None);
    }
    let values: Vec<f64> = unlabeled.iter().map(|&i| scores[i]).collect();
    let tau = percentile_threshold(&values, percentile)?;
    let mut candidates: Vec<usize> = unlabeled.into_iter().filter(|&i| scores[i] > tau).collect();
    candidates.sort_by(by_score_desc(scores));
    candidates.truncate(budget);
    Ok(Some(Selection { tau, candidates }))
}

/// Union over anchors of `{x ∈ pool : S(x, anchor) ≥ percentile_p(S(·, anchor) over pool)}`.
fn neighbourhoods(
    anchors: &[usize],
    pool: &[usize],
    rows: &[BitVector],
    metric: SimilarityMetric,
    percentile: f64,
) -> Result<(Vec<bool>, Vec<AnchorThreshold>)> {
    let mut hit = vec![false; rows.len()];
    let mut thresholds = Vec::with_capacity(anchors.len());
    if pool.is_empty() {
        return Ok((hit, thresholds));
    }
    let mut sims = vec![0.0; pool.len()];
    for &a in anchors {
        for (s, &x) in sims.iter_mut().zip(pool) {
            *s = sim_metric(&rows[x], &rows[a], metric)?;
        }
        let threshold = percentile_threshold(&sims, percentile)?;
        for (&s, &x) in sims.iter().zip(pool) {
            if s >= threshold {
                hit[x] = true;
            }
        }
        thresholds.push(AnchorThreshold { anchor: a, threshold });
    }
    Ok((hit, thresholds))
}

/// Rows similar to confirmed normals, to be added to the training pool.
pub fn strategy1_expand(
    normals: &[usize],
    unlabeled: &[usize],
    rows: &[BitVector],
    metric: SimilarityMetric,
    percentile: f64,
) -> Result<Expansion> {
    let (hit, thresholds) = neighbourhoods(normals, unlabeled, rows, metric, percentile)?;
    Ok(Expansion {
        rows: (0..hit.len()).filter(|&i| hit[i]).collect(),
        thresholds,
    })
}

/// Priority block `R_priority`: confirmed anomalies, then unlabeled rows
/// similar to any of them, both by descending score.
pub fn strategy2_prioritize(
    anomalies: &[usize],
    unlabeled: &[usize],
    rows: &[BitVector],
    metric: SimilarityMetric,
    percentile: f64,
    scores: &[f64],
) -> Result<Prioritization> {
    if anomalies.is_empty() {
        return Ok(Prioritization::default());
    }
    let (hit, thresholds) = neighbourhoods(anomalies, unlabeled, rows, metric, percentile)?;
    let mut head = anomalies.to_vec();
    head.sort_by(by_score_desc(scores));
    let mut similar: Vec<usize> = (0..hit.len()).filter(|&i| hit[i]).collect();
    similar.sort_by(by_score_desc(scores));
    let mut seen = vec![false; scores.len()];
    let rows = head
        .into_iter()
        .chain(similar)
        .filter(|&i| !std::mem::replace(&mut seen[i], true))
        .collect();
    Ok(Prioritization { rows, thresholds })
}

/// Full ranking: the priority block first for S2/Hybrid, then every other row
/// by descending score.
pub fn build_ranking(strategy: Strategy, scores: &[f64], priority: &[usize]) -> Vec<usize> {
    let n = scores.len();
    let mut placed = vec![false; n];
    let mut ranking = Vec::with_capacity(n);
    if strategy.prioritizes() {
        for &i in priority {
            if i < n && !std::mem::replace(&mut placed[i], true) {
                ranking.push(i);
            }
        }
    }
    let mut rest: Vec<usize> = (0..n).filter(|&i| !placed[i]).collect();
    rest.sort_by(by_score_desc(scores));
    ranking.extend(rest);
    ranking
}
