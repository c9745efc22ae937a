use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{summarize, MetricSeries, SummaryTriplet};
use crate::{Error, Result};

/// One row of the flat per-iteration table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub iteration: usize,
    pub ndcg: Option<f64>,
    pub tau: Option<f64>,
    pub queried_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRun {
    pub strategy: String,
    pub iterations: Vec<IterationRow>,
}

impl StrategyRun {
    /// nDCG series, or `None` when any iteration lacks a value.
    pub fn series(&self) -> Option<MetricSeries> {
        let mut s = MetricSeries::new(self.strategy.clone());
        for row in &self.iterations {
            s.push(row.iteration, row.ndcg?).ok()?;
        }
        Some(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub checksum: String,
    pub rows: usize,
    pub features: usize,
    pub anomalies: Option<usize>,
}

/// Non-deterministic facts about a run, kept out of the report body.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub created_unix_secs: u64,
    /// Wall-clock milliseconds per iteration, keyed by strategy.
    pub wall_clock_ms: BTreeMap<String, Vec<f64>>,
}

/// Result of one or more active-learning sessions over the same dataset.
///
/// The text form is a `# meta` line holding [`RunMeta`] followed by a pretty
/// JSON body that depends only on seeds, configs and data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: DatasetInfo,
    pub session_config: serde_json::Value,
    pub model_config: serde_json::Value,
    pub ndcg_cutoff: Option<usize>,
    pub runs: Vec<StrategyRun>,
    pub summary: Option<SummaryTriplet>,
    #[serde(skip)]
    pub meta: RunMeta,
}

const META_PREFIX: &str = "# meta ";

impl RunReport {
    /// Summary over the non-passive runs (all runs if only passive exists).
    pub fn compute_summary(&self) -> Option<SummaryTriplet> {
        let active: Vec<&StrategyRun> = self.runs.iter().filter(|r| r.strategy != "passive").collect();
        let chosen: Vec<&StrategyRun> = if active.is_empty() { self.runs.iter().collect() } else { active };
        let series: Option<Vec<MetricSeries>> = chosen.iter().map(|r| r.series()).collect();
        summarize(&series?).ok()
    }

    pub fn run(&self, strategy: &str) -> Option<&StrategyRun> {
        self.runs.iter().find(|r| r.strategy == strategy)
    }

    pub fn body_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn to_text(&self) -> String {
        let meta = serde_json::to_string(&self.meta).expect("meta serialises");
        format!("{META_PREFIX}{meta}\n{}\n", self.body_json())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (meta, body) = match text.strip_prefix(META_PREFIX) {
            Some(rest) => {
                let (line, body) = rest.split_once('\n').unwrap_or((rest, ""));
                (serde_json::from_str(line)?, body)
            }
            None => (RunMeta::default(), text),
        };
        let mut report: RunReport = serde_json::from_str(body)?;
        report.meta = meta;
        Ok(report)
    }

    /// `iteration,strategy,ndcg,tau,queried_count`; absent values are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,strategy,ndcg,tau,queried_count\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for run in &self.runs {
            for row in &run.iterations {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    row.iteration,
                    run.strategy,
                    opt(row.ndcg),
                    opt(row.tau),
                    row.queried_count
                );
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunReport {
        let rows = |v: &[f64]| {
            v.iter()
                .enumerate()
                .map(|(i, &x)| IterationRow {
                    iteration: i,
                    ndcg: Some(x),
                    tau: Some(0.25),
                    queried_count: if i == 0 { 0 } else { 3 },
                })
                .collect()
        };
        RunReport {
            dataset: DatasetInfo {
                name: "toy".into(),
                checksum: "abc".into(),
                rows: 10,
                features: 4,
                anomalies: Some(1),
            },
            session_config: serde_json::json!({"budget": 3}),
            model_config: serde_json::json!({"d": 4}),
            ndcg_cutoff: None,
            runs: vec![
                StrategyRun {
                    strategy: "passive".into(),
                    iterations: rows(&[0.9, 0.9]),
                },
                StrategyRun {
                    strategy: "hybrid".into(),
                    iterations: rows(&[0.4, 0.7]),
                },
            ],
            summary: None,
            meta: RunMeta {
                created_unix_secs: 5,
                wall_clock_ms: BTreeMap::from([("hybrid".to_string(), vec![1.5, 2.0])]),
            },
        }
    }

    #[test]
    fn summary_skips_passive() {
        let s = sample().compute_summary().unwrap();
        assert_eq!((s.max_max, s.max_median), (0.7, 0.4));
    }

    #[test]
    fn text_round_trip_and_deterministic_body() {
        let mut r = sample();
        r.summary = r.compute_summary();
        let back = RunReport::from_text(&r.to_text()).unwrap();
        assert_eq!(back, r);
        let mut other = r.clone();
        other.meta.created_unix_secs = 99;
        assert_eq!(other.body_json(), r.body_json());
        assert_ne!(other.to_text(), r.to_text());
    }

    #[test]
    fn csv_rows() {
        let csv = sample().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "iteration,strategy,ndcg,tau,queried_count");
        assert_eq!(lines[4], "1,hybrid,0.7,0.25,3");
    }
}
