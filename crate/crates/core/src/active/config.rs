use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::simsearch::SimilarityMetric;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    S1,
    S2,
    Hybrid,
    Passive,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::S1, Strategy::S2, Strategy::Hybrid, Strategy::Passive];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::S1 => "s1",
            Strategy::S2 => "s2",
            Strategy::Hybrid => "hybrid",
            Strategy::Passive => "passive",
        }
    }

    pub fn expands(self) -> bool {
        matches!(self, Strategy::S1 | Strategy::Hybrid)
    }

    pub fn prioritizes(self) -> bool {
        matches!(self, Strategy::S2 | Strategy::Hybrid)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy {s:?} (expected s1, s2, hybrid or passive)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RetrainPolicy {
    /// Fresh initialisation with a seed derived from the session seed and iteration.
    #[default]
    FromScratch,
    /// Continue from the current parameters.
    WarmStart,
}

impl FromStr for RetrainPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "from-scratch" => Ok(RetrainPolicy::FromScratch),
            "warm-start" => Ok(RetrainPolicy::WarmStart),
            _ => Err(Error::InvalidArgument(format!(
                "unknown retrain policy {s:?} (expected from-scratch or warm-start)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub strategy: Strategy,
    /// Maximum number of feedback iterations `T`.
    pub iterations: usize,
    /// Oracle queries per iteration `Q`.
    pub budget: usize,
    /// Percentile of unlabeled scores used as the candidate threshold τ.
    pub error_percentile: f64,
    /// Per-anchor similarity percentile for expansion and prioritisation.
    pub sim_percentile: f64,
    pub metric: SimilarityMetric,
    pub retrain_policy: RetrainPolicy,
    pub ndcg_cutoff: Option<usize>,
    /// Fraction of rows presumed normal for the initial model.
    pub cold_start_fraction: f64,
    pub seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Hybrid,
            iterations: 20,
            budget: 10,
            error_percentile: 80.0,
            sim_percentile: 80.0,
            metric: SimilarityMetric::Nm1,
            retrain_policy: RetrainPolicy::FromScratch,
            ndcg_cutoff: None,
            cold_start_fraction: 0.1,
            seed: 42,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.iterations == 0 {
            return bad("T >= 1 violated: iterations must be at least 1");
        }
        if self.budget == 0 {
            return bad("Q >= 1 violated: budget must be at least 1");
        }
        for (name, p) in [("error_percentile", self.error_percentile), ("sim_percentile", self.sim_percentile)] {
            if !(p > 0.0 && p < 100.0) {
                return bad(&format!("{name} in (0, 100) violated: got {p}"));
            }
        }
        if !(self.cold_start_fraction > 0.0 && self.cold_start_fraction <= 1.0) {
            return bad("cold_start_fraction in (0, 1] violated");
        }
        if self.ndcg_cutoff == Some(0) {
            return bad("ndcg_cutoff >= 1 violated");
        }
        Ok(())
    }
}
