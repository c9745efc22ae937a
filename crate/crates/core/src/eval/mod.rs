//! Ranking quality: DCG/nDCG with binary relevance, per-strategy metric
//! series, the max-of-summary triplet and cross-method average ranks.

mod report;

pub use report::{DatasetInfo, IterationRow, RunMeta, RunReport, StrategyRun};

use serde::{Deserialize, Serialize};

use crate::data::LabelMap;
use crate::{Error, Result};

/// Discounted cumulative gain of a binary relevance list, positions from 1.
pub fn dcg(relevances: &[bool]) -> f64 {
    relevances
        .iter()
        .enumerate()
        .filter(|(_, &r)| r)
        .map(|(i, _)| 1.0 / ((i + 2) as f64).log2())
        .sum()
}

/// Binary relevance per row index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceLabels {
    relevant: Vec<bool>,
}

impl RelevanceLabels {
    pub fn new(relevant: Vec<bool>) -> Self {
        Self { relevant }
    }

    pub fn from_labels(labels: &LabelMap) -> Self {
        Self::new(labels.relevance())
    }

    pub fn len(&self) -> usize {
        self.relevant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relevant.is_empty()
    }

    pub fn get(&self, row: usize) -> bool {
        self.relevant[row]
    }

    pub fn anomaly_count(&self) -> usize {
        self.relevant.iter().filter(|&&r| r).count()
    }
}

/// nDCG of `ranking` (row indices). Without a cutoff the ranking must be a
/// permutation of every labelled row; with cutoff `k` a prefix of at least
/// `min(k, n)` distinct rows suffices.
pub fn ndcg(ranking: &[usize], labels: &RelevanceLabels, cutoff: Option<usize>) -> Result<f64> {
    let n = labels.len();
    let anomalies = labels.anomaly_count();
    if anomalies == 0 {
        return Err(Error::UndefinedMetric("nDCG is undefined without any anomaly".into()));
    }
    if cutoff == Some(0) {
        return Err(Error::InvalidArgument("nDCG cutoff must be at least 1".into()));
    }
    let depth = cutoff.map_or(n, |k| k.min(n));
    if ranking.len() < depth || (cutoff.is_none() && ranking.len() != n) {
        return Err(Error::InvalidArgument(format!(
            "ranking has {} entries, expected {}",
            ranking.len(),
            if cutoff.is_none() { n } else { depth }
        )));
    }
    let mut seen = vec![false; n];
    for &r in ranking {
        if r >= n || std::mem::replace(&mut seen[r], true) {
            return Err(Error::InvalidArgument(format!("ranking entry {r} is out of range or repeated")));
        }
    }
    let rel: Vec<bool> = ranking[..depth].iter().map(|&r| labels.get(r)).collect();
    let ideal: Vec<bool> = (0..depth).map(|i| i < anomalies).collect();
    Ok(dcg(&rel) / dcg(&ideal))
}

/// Ordered `(iteration, nDCG)` points for one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub strategy: String,
    pub points: Vec<(usize, f64)>,
}

impl MetricSeries {
    pub fn new(strategy: impl Into<String>) -> Self {
        Self {
            strategy: strategy.into(),
            points: Vec::new(),
        }
    }

    pub fn push(&mut self, iteration: usize, value: f64) -> Result<()> {
        if let Some(&(last, _)) = self.points.last() {
            if iteration <= last {
                return Err(Error::InvalidArgument(format!(
                    "iteration {iteration} does not follow {last}"
                )));
            }
        }
        self.points.push((iteration, value));
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max(&self) -> Result<f64> {
        non_empty(&self.values()).map(|v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn mean(&self) -> Result<f64> {
        non_empty(&self.values()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn median(&self) -> Result<f64> {
        median_lower(&self.values())
    }
}

fn non_empty(v: &[f64]) -> Result<&[f64]> {
    if v.is_empty() {
        Err(Error::InvalidArgument("empty metric series".into()))
    } else {
        Ok(v)
    }
}

/// Median; even lengths take the lower of the two middle values.
pub fn median_lower(values: &[f64]) -> Result<f64> {
    non_empty(values)?;
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v[(v.len() - 1) / 2])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryTriplet {
    pub max_max: f64,
    pub max_mean: f64,
    pub max_median: f64,
}

/// Per-series max, mean and median, each maximised across the series.
pub fn summarize(series: &[MetricSeries]) -> Result<SummaryTriplet> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("no series to summarize".into()));
    }
    let mut out = SummaryTriplet {
        max_max: f64::NEG_INFINITY,
        max_mean: f64::NEG_INFINITY,
        max_median: f64::NEG_INFINITY,
    };
    for s in series {
        out.max_max = out.max_max.max(s.max()?);
        out.max_mean = out.max_mean.max(s.mean()?);
        out.max_median = out.max_median.max(s.median()?);
    }
    Ok(out)
}

/// Mean rank of each method (rows of `table`) over datasets (columns);
/// rank 1 is the highest score and ties share their mean rank. NaN marks a
/// missing cell.
pub fn average_ranks(table: &[Vec<f64>]) -> Result<Vec<f64>> {
    let methods = table.len();
    let datasets = table.first().map_or(0, Vec::len);
    if methods == 0 || datasets == 0 {
        return Err(Error::InvalidArgument("empty score table".into()));
    }
    for (m, row) in table.iter().enumerate() {
        if row.len() != datasets {
            return Err(Error::InvalidArgument(format!("method {m} has {} scores, expected {datasets}", row.len())));
        }
        if let Some(j) = row.iter().position(|v| v.is_nan()) {
            return Err(Error::InvalidArgument(format!("missing score for method {m}, dataset {j}")));
        }
    }
    let mut totals = vec![0.0; methods];
    for j in 0..datasets {
        for (m, total) in totals.iter_mut().enumerate() {
            let s = table[m][j];
            let better = table.iter().filter(|r| r[j] > s).count();
            let tied = table.iter().filter(|r| r[j] == s).count();
            *total += better as f64 + (tied as f64 + 1.0) / 2.0;
        }
    }
    Ok(totals.into_iter().map(|t| t / datasets as f64).collect())
}
