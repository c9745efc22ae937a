use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::{RetrainPolicy, SessionConfig, Strategy};
use super::journal::{Journal, JournalEntry, JournalHeader, JOURNAL_VERSION};
use super::oracle::{Oracle, SimulatedOracle};
use super::select::{
    build_ranking, select_candidates, strategy1_expand, strategy2_prioritize, AnchorThreshold, Selection,
};
use super::sets::LabeledSets;
use crate::data::{sha256_hex, BinaryDataset, Label, LabelMap};
use crate::eval::{ndcg, DatasetInfo, IterationRow, RelevanceLabels, RunMeta, RunReport, StrategyRun};
use crate::rng::{child_rng, derive_seed};
use crate::sda2e::{fit, Sda2eConfig, Sda2eModel, TrainOptions};
use crate::{Error, Result};

const COLD_START_STREAM: u64 = 0xC01D;
const MODEL_STREAM: u64 = 0x5EED;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Training,
    AwaitingLabels,
    Retraining,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryAnswer {
    pub row: usize,
    pub id: String,
    pub score: f64,
    pub label: Label,
}

/// Everything that happened in one iteration. Iteration 0 is the baseline
/// before any feedback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub tau: Option<f64>,
    pub queried: Vec<QueryAnswer>,
    /// Per confirmed-normal thresholds used for pool expansion.
    pub normal_thresholds: Vec<AnchorThreshold>,
    /// Per confirmed-anomaly thresholds used for prioritisation.
    pub anomaly_thresholds: Vec<AnchorThreshold>,
    pub expanded: Vec<usize>,
    pub priority: Vec<usize>,
    pub pool_size: usize,
    /// Short digest identifying the ranking.
    pub ranking_digest: String,
    pub ndcg: Option<f64>,
}

fn ranking_digest(ranking: &[usize]) -> String {
    let text: Vec<String> = ranking.iter().map(usize::to_string).collect();
    sha256_hex(text.join(",").as_bytes())[..16].to_string()
}

/// Step-wise active-learning session.
///
/// [`Session::start`] trains the cold-start model and records iteration 0.
/// Each later iteration is driven by [`Session::submit`] calls for every
/// pending row followed by one [`Session::advance`].
#[derive(Debug, Clone)]
pub struct Session {
    dataset: Arc<BinaryDataset>,
    relevance: Option<RelevanceLabels>,
    config: SessionConfig,
    model_config: Sda2eConfig,
    model: Sda2eModel,
    sets: LabeledSets,
    scores: Vec<f64>,
    ranking: Vec<usize>,
    records: Vec<IterationRecord>,
    phase: Phase,
    selection: Option<Selection>,
    answers: Vec<Option<Label>>,
    journal: Journal,
    wall_clock_ms: Vec<f64>,
    started: Instant,
}

impl Session {
    pub fn start(
        dataset: Arc<BinaryDataset>,
        relevance: Option<RelevanceLabels>,
        config: SessionConfig,
        model_config: Sda2eConfig,
        mut journal: Journal,
    ) -> Result<Self> {
        let started = Instant::now();
        config.validate()?;
        model_config.validate()?;
        if dataset.is_empty() {
            return Err(Error::Data("cannot start a session on an empty dataset".into()));
        }
        if model_config.d != dataset.d() {
            return Err(Error::Config(format!(
                "model d = {} does not match dataset width {}",
                model_config.d,
                dataset.d()
            )));
        }
        if let Some(r) = &relevance {
            if r.len() != dataset.len() {
                return Err(Error::Data(format!("{} labels for {} rows", r.len(), dataset.len())));
            }
            if r.anomaly_count() == 0 {
                return Err(Error::UndefinedMetric(
                    "ground truth has no anomalies, so nDCG is undefined".into(),
                ));
            }
        }
        journal.append(JournalEntry::Header(JournalHeader {
            version: JOURNAL_VERSION,
            dataset_checksum: dataset.checksum(),
            dataset_rows: dataset.len(),
            session_config: config.clone(),
            model_config: model_config.clone(),
        }))?;

        let n = dataset.len();
        let mut sets = LabeledSets::new(n);
        let take = ((n as f64 * config.cold_start_fraction).round() as usize).clamp(1, n);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut child_rng(config.seed, COLD_START_STREAM));
        for &i in &order[..take] {
            sets.add_to_pool(i);
        }

        let mut session = Self {
            model: Sda2eModel::new(Self::seeded(&model_config, config.seed, 0))?,
            dataset,
            relevance,
            config,
            model_config,
            sets,
            scores: Vec::new(),
            ranking: Vec::new(),
            records: Vec::new(),
            phase: Phase::Training,
            selection: None,
            answers: Vec::new(),
            journal,
            wall_clock_ms: Vec::new(),
            started,
        };
        session.train(0, RetrainPolicy::FromScratch)?;
        session.ranking = build_ranking(session.config.strategy, &session.scores, &[]);
        let record = IterationRecord {
            iteration: 0,
            tau: None,
            queried: Vec::new(),
            normal_thresholds: Vec::new(),
            anomaly_thresholds: Vec::new(),
            expanded: Vec::new(),
            priority: Vec::new(),
            pool_size: session.sets.pool().len(),
            ranking_digest: ranking_digest(&session.ranking),
            ndcg: session.evaluate()?,
        };
        session.finish_iteration(record)?;
        Ok(session)
    }

    fn seeded(cfg: &Sda2eConfig, session_seed: u64, iteration: usize) -> Sda2eConfig {
        let mut cfg = cfg.clone();
        cfg.seed = derive_seed(derive_seed(session_seed, MODEL_STREAM), iteration as u64);
        cfg
    }

    fn train(&mut self, iteration: usize, policy: RetrainPolicy) -> Result<()> {
        let cfg = Self::seeded(&self.model_config, self.config.seed, iteration);
        if policy == RetrainPolicy::FromScratch {
            self.model = Sda2eModel::new(cfg.clone())?;
        }
        let rows: Vec<Vec<f64>> = self.sets.pool().into_iter().map(|i| self.dataset.row_f64(i)).collect();
        if !rows.is_empty() {
            fit(&mut self.model, &rows, cfg.epochs, cfg.seed, TrainOptions::default())?;
        }
        self.scores = self.model.score_all(&self.dataset)?;
        Ok(())
    }

    fn evaluate(&self) -> Result<Option<f64>> {
        self.relevance
            .as_ref()
            .map(|r| ndcg(&self.ranking, r, self.config.ndcg_cutoff))
            .transpose()
    }

    fn finish_iteration(&mut self, record: IterationRecord) -> Result<()> {
        self.journal.append(JournalEntry::Iteration { record: record.clone() })?;
        self.records.push(record);
        self.wall_clock_ms.push(self.started.elapsed().as_secs_f64() * 1e3);
        self.started = Instant::now();
        self.prepare_next()
    }

    fn prepare_next(&mut self) -> Result<()> {
        self.selection = None;
        self.answers.clear();
        if self.records.len() > self.config.iterations {
            self.phase = Phase::Complete;
            return Ok(());
        }
        match select_candidates(&self.scores, &self.sets, self.config.error_percentile, self.config.budget)? {
            Some(sel) if !sel.candidates.is_empty() => {
                self.answers = vec![None; sel.candidates.len()];
                self.selection = Some(sel);
                self.phase = Phase::AwaitingLabels;
            }
            _ => self.phase = Phase::Complete,
        }
        Ok(())
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn is_complete(&self) -> bool {
        self.phase == Phase::Complete
    }

    /// Index of the iteration whose labels are being collected.
    pub fn current_iteration(&self) -> usize {
        self.records.len()
    }

    pub fn selection(&self) -> Option<&Selection> {
        self.selection.as_ref()
    }

    /// Candidate rows still waiting for an answer, highest score first.
    pub fn pending(&self) -> Vec<usize> {
        match &self.selection {
            Some(sel) => sel
                .candidates
                .iter()
                .zip(&self.answers)
                .filter(|(_, a)| a.is_none())
                .map(|(&r, _)| r)
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn ready_to_advance(&self) -> bool {
        self.phase == Phase::AwaitingLabels && self.answers.iter().all(Option::is_some)
    }

    /// Records an answer for a pending row.
    pub fn submit(&mut self, row: usize, label: Label) -> Result<()> {
        if self.phase != Phase::AwaitingLabels {
            return Err(Error::Session(format!("cannot accept labels while {:?}", self.phase)));
        }
        let sel = self.selection.as_ref().expect("awaiting labels implies a selection");
        let slot = sel.candidates.iter().position(|&c| c == row).ok_or_else(|| {
            let state = if row < self.sets.len() && self.sets.state(row) != super::sets::RowState::Unlabeled {
                "already labeled"
            } else {
                "not pending"
            };
            Error::Session(format!("row {:?} is {state}", self.dataset.ids().get(row)))
        })?;
        if self.answers[slot].is_some() {
            return Err(Error::Session(format!("row {:?} already answered", self.dataset.id(row))));
        }
        self.journal.append(JournalEntry::Label {
            iteration: self.records.len(),
            id: self.dataset.id(row).to_string(),
            label,
        })?;
        self.answers[slot] = Some(label);
        Ok(())
    }

    pub fn submit_id(&mut self, id: &str, label: Label) -> Result<()> {
        let row = self
            .dataset
            .index_of(id)
            .ok_or_else(|| Error::Session(format!("unknown id {id:?}")))?;
        self.submit(row, label)
    }

    /// Applies the collected answers and the strategy, producing the next record.
    pub fn advance(&mut self) -> Result<()> {
        if !self.ready_to_advance() {
            return Err(Error::Session(format!(
                "cannot advance: phase {:?} with {} pending rows",
                self.phase,
                self.pending().len()
            )));
        }
        let t = self.records.len();
        let sel = self.selection.take().expect("ready implies a selection");
        let mut queried = Vec::with_capacity(sel.candidates.len());
        for (&row, answer) in sel.candidates.iter().zip(&self.answers) {
            let label = answer.expect("ready implies all answered");
            self.sets.record(row, label)?;
            queried.push(QueryAnswer {
                row,
                id: self.dataset.id(row).to_string(),
                score: self.scores[row],
                label,
            });
        }
        let strategy = self.config.strategy;
        let dataset = Arc::clone(&self.dataset);
        let rows = dataset.rows();
        let mut record = IterationRecord {
            iteration: t,
            tau: Some(sel.tau),
            queried,
            normal_thresholds: Vec::new(),
            anomaly_thresholds: Vec::new(),
            expanded: Vec::new(),
            priority: Vec::new(),
            pool_size: 0,
            ranking_digest: String::new(),
            ndcg: None,
        };
        if strategy.expands() {
            let e = strategy1_expand(
                &self.sets.normals(),
                &self.sets.unlabeled(),
                rows,
                self.config.metric,
                self.config.sim_percentile,
            )?;
            for &r in &e.rows {
                self.sets.add_to_pool(r);
            }
            record.expanded = e.rows;
            record.normal_thresholds = e.thresholds;
            self.train(t, self.config.retrain_policy)?;
        }
        if strategy.prioritizes() {
            let p = strategy2_prioritize(
                &self.sets.anomalies(),
                &self.sets.unlabeled(),
                rows,
                self.config.metric,
                self.config.sim_percentile,
                &self.scores,
            )?;
            record.priority = p.rows;
            record.anomaly_thresholds = p.thresholds;
        }
        self.ranking = build_ranking(strategy, &self.scores, &record.priority);
        record.pool_size = self.sets.pool().len();
        record.ranking_digest = ranking_digest(&self.ranking);
        record.ndcg = self.evaluate()?;
        self.finish_iteration(record)
    }

    pub fn dataset(&self) -> &Arc<BinaryDataset> {
        &self.dataset
    }

    pub fn relevance(&self) -> Option<&RelevanceLabels> {
        self.relevance.as_ref()
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn model_config(&self) -> &Sda2eConfig {
        &self.model_config
    }

    pub fn model(&self) -> &Sda2eModel {
        &self.model
    }

    pub fn sets(&self) -> &LabeledSets {
        &self.sets
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn ranking(&self) -> &[usize] {
        &self.ranking
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn journal(&self) -> &Journal {
        &self.journal
    }

    pub fn wall_clock_ms(&self) -> &[f64] {
        &self.wall_clock_ms
    }

    pub fn strategy_run(&self) -> StrategyRun {
        StrategyRun {
            strategy: self.config.strategy.name().to_string(),
            iterations: self
                .records
                .iter()
                .map(|r| IterationRow {
                    iteration: r.iteration,
                    ndcg: r.ndcg,
                    tau: r.tau,
                    queried_count: r.queried.len(),
                })
                .collect(),
        }
    }

    pub fn report(&self, dataset_name: &str) -> RunReport {
        build_report(dataset_name, &self.dataset, self.relevance.as_ref(), &[self])
    }
}

/// One report holding a run per session, all over the same dataset.
pub fn combined_report(dataset_name: &str, sessions: &[&Session]) -> Result<RunReport> {
    let first = sessions
        .first()
        .ok_or_else(|| Error::InvalidArgument("no sessions to report".into()))?;
    if sessions.iter().any(|s| !Arc::ptr_eq(&s.dataset, &first.dataset) && s.dataset.checksum() != first.dataset.checksum()) {
        return Err(Error::Data("sessions ran on different datasets".into()));
    }
    Ok(build_report(dataset_name, &first.dataset, first.relevance.as_ref(), sessions))
}

fn build_report(
    name: &str,
    dataset: &BinaryDataset,
    relevance: Option<&RelevanceLabels>,
    sessions: &[&Session],
) -> RunReport {
    let first = sessions[0];
    let mut session_config = serde_json::to_value(&first.config).expect("config serialises");
    if sessions.len() > 1 {
        session_config["strategy"] = sessions.iter().map(|s| s.config.strategy.name()).collect();
    }
    let mut report = RunReport {
        dataset: DatasetInfo {
            name: name.to_string(),
            checksum: dataset.checksum(),
            rows: dataset.len(),
            features: dataset.d(),
            anomalies: relevance.map(RelevanceLabels::anomaly_count),
        },
        session_config,
        model_config: serde_json::to_value(&first.model_config).expect("config serialises"),
        ndcg_cutoff: first.config.ndcg_cutoff,
        runs: sessions.iter().map(|s| s.strategy_run()).collect(),
        summary: None,
        meta: RunMeta {
            created_unix_secs: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            wall_clock_ms: sessions
                .iter()
                .map(|s| (s.config.strategy.name().to_string(), s.wall_clock_ms.clone()))
                .collect(),
        },
    };
    report.summary = report.compute_summary();
    report
}

/// Result of a session driven to completion.
#[derive(Debug, Clone)]
pub struct SessionOutcome {
    pub session: Session,
    pub report: RunReport,
}

impl SessionOutcome {
    pub fn ranking(&self) -> &[usize] {
        self.session.ranking()
    }

    pub fn model(&self) -> &Sda2eModel {
        self.session.model()
    }
}

/// Drives a session to completion, asking `oracle` about every candidate.
pub fn run_session(
    dataset: Arc<BinaryDataset>,
    oracle: &mut dyn Oracle,
    relevance: Option<RelevanceLabels>,
    config: SessionConfig,
    model_config: Sda2eConfig,
    journal: Journal,
) -> Result<SessionOutcome> {
    let mut session = Session::start(dataset, relevance, config, model_config, journal)?;
    while session.phase() == Phase::AwaitingLabels {
        for row in session.pending() {
            let label = oracle.label(row)?;
            session.submit(row, label)?;
        }
        session.advance()?;
    }
    let report = session.report("dataset");
    Ok(SessionOutcome { session, report })
}

/// Runs each strategy with a fresh simulated oracle and merges the reports.
pub fn run_strategies(
    dataset_name: &str,
    dataset: Arc<BinaryDataset>,
    labels: &LabelMap,
    strategies: &[Strategy],
    config: &SessionConfig,
    model_config: &Sda2eConfig,
) -> Result<(RunReport, Vec<Session>)> {
    if strategies.is_empty() {
        return Err(Error::InvalidArgument("no strategies requested".into()));
    }
    let relevance = RelevanceLabels::from_labels(labels);
    let mut sessions = Vec::with_capacity(strategies.len());
    for &strategy in strategies {
        let cfg = SessionConfig {
            strategy,
            ..config.clone()
        };
        let mut oracle = SimulatedOracle::new(labels.clone());
        let out = run_session(
            dataset.clone(),
            &mut oracle,
            Some(relevance.clone()),
            cfg,
            model_config.clone(),
            Journal::in_memory(),
        )?;
        sessions.push(out.session);
    }
    let refs: Vec<&Session> = sessions.iter().collect();
    let report = build_report(dataset_name, &dataset, Some(&relevance), &refs);
    Ok((report, sessions))
}
