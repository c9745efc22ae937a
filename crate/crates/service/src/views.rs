//! Response bodies.

use serde::{Deserialize, Serialize};

use sda2e_core::active::{Phase, Session};
use sda2e_core::data::Label;
use sda2e_core::eval::SummaryTriplet;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatasetView {
    pub name: String,
    pub rows: usize,
    pub features: usize,
    pub anomalies: Option<usize>,
    pub checksum: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LabelCounts {
    pub normal: usize,
    pub anomaly: usize,
    pub unlabeled: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SessionView {
    pub id: String,
    pub dataset: String,
    pub phase: Phase,
    /// Completed iterations, counting the cold-start iteration 0.
    pub iterations_done: usize,
    pub iterations_total: usize,
    pub budget: usize,
    pub queried_total: usize,
    pub pending: Vec<String>,
    pub labels: Option<LabelCounts>,
    pub pool_size: Option<usize>,
    pub strategy: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FeatureWeight {
    pub name: String,
    pub attention: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Neighbour {
    pub id: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Candidate {
    pub id: String,
    pub row: usize,
    pub score: f64,
    /// 1-based position in the current ranking.
    pub rank: usize,
    pub top_features: Vec<FeatureWeight>,
    pub nearest_anomalies: Vec<Neighbour>,
    pub nearest_normals: Vec<Neighbour>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CandidatesView {
    pub iteration: usize,
    pub tau: Option<f64>,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LabelsAck {
    pub accepted: usize,
    pub phase: Phase,
    pub pending: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricPoint {
    pub iteration: usize,
    pub ndcg: Option<f64>,
    pub tau: Option<f64>,
    pub queried_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RankedRow {
    pub rank: usize,
    pub id: String,
    pub row: usize,
    pub score: f64,
    pub label: Option<Label>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RankingPage {
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub rows: Vec<RankedRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricsView {
    pub strategy: String,
    pub series: Vec<MetricPoint>,
    pub summary: Option<SummaryTriplet>,
    pub ranking: RankingPage,
}

pub fn metric_points(session: &Session) -> Vec<MetricPoint> {
    session
        .records()
        .iter()
        .map(|r| MetricPoint {
            iteration: r.iteration,
            ndcg: r.ndcg,
            tau: r.tau,
            queried_count: r.queried.len(),
        })
        .collect()
}

pub fn ranking_page(session: &Session, offset: usize, limit: usize) -> RankingPage {
    let ranking = session.ranking();
    let dataset = session.dataset();
    let rows = ranking
        .iter()
        .enumerate()
        .skip(offset)
        .take(limit)
        .map(|(pos, &row)| RankedRow {
            rank: pos + 1,
            id: dataset.id(row).to_string(),
            row,
            score: session.scores()[row],
            label: session.sets().state(row).label(),
        })
        .collect();
    RankingPage {
        total: ranking.len(),
        offset,
        limit,
        rows,
    }
}
