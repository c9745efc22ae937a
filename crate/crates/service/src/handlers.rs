use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::Json;
use serde::Deserialize;
use serde_json::Value;

use sda2e_core::active::{Journal, Phase, Session, SessionConfig};
use sda2e_core::data::{parse_csv, parse_labels, Label};
use sda2e_core::eval::{summarize, RelevanceLabels};
use sda2e_core::sda2e::Sda2eConfig;
use sda2e_core::simsearch::topk_similar;

use crate::error::{ApiError, ApiResult};
use crate::state::{AppState, DatasetEntry, SessionEntry, Slot};
use crate::views::*;

type AppStateRef = State<Arc<AppState>>;

pub async fn healthz() -> Json<Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

#[derive(Debug, Deserialize)]
pub struct DatasetUpload {
    pub name: String,
    pub csv: String,
    #[serde(default)]
    pub labels_csv: Option<String>,
}

pub async fn create_dataset(
    State(state): AppStateRef,
    Json(req): Json<DatasetUpload>,
) -> ApiResult<(StatusCode, Json<DatasetView>)> {
    if req.name.is_empty() {
        return Err(ApiError::bad_request("invalid_argument", "dataset name must not be empty"));
    }
    let dataset = parse_csv(req.csv.as_bytes())?;
    let labels = req
        .labels_csv
        .as_deref()
        .map(|text| parse_labels(text.as_bytes(), &dataset, true))
        .transpose()?;
    let view = DatasetView {
        name: req.name.clone(),
        rows: dataset.len(),
        features: dataset.d(),
        anomalies: labels.as_ref().map(|l| l.anomaly_count()),
        checksum: dataset.checksum(),
    };
    let mut datasets = state.datasets.write().expect("dataset registry poisoned");
    if datasets.contains_key(&req.name) {
        return Err(ApiError::conflict("duplicate_dataset", format!("dataset {:?} already exists", req.name)));
    }
    datasets.insert(
        req.name.clone(),
        DatasetEntry {
            name: req.name,
            dataset: Arc::new(dataset),
            labels,
        },
    );
    Ok((StatusCode::CREATED, Json(view)))
}

#[derive(Debug, Deserialize)]
pub struct SessionRequest {
    pub dataset: String,
    /// Partial session configuration; missing fields take their defaults.
    #[serde(default)]
    pub session_config: Option<Value>,
    /// Partial model configuration over the defaults for the dataset width.
    #[serde(default)]
    pub model_config: Option<Value>,
    /// Block until the cold-start model is trained.
    #[serde(default)]
    pub wait: bool,
}

fn merge<T: serde::Serialize + serde::de::DeserializeOwned>(base: &T, patch: Option<&Value>, what: &str) -> ApiResult<T> {
    let mut value = serde_json::to_value(base).expect("config serializes");
    if let Some(patch) = patch {
        let patch = patch
            .as_object()
            .ok_or_else(|| ApiError::bad_request("invalid_config", format!("{what} must be an object")))?;
        let obj = value.as_object_mut().expect("config is an object");
        for (k, v) in patch {
            if !obj.contains_key(k) {
                return Err(ApiError::bad_request("invalid_config", format!("unknown {what} field {k:?}")));
            }
            obj.insert(k.clone(), v.clone());
        }
    }
    serde_json::from_value(value)
        .map_err(|e| ApiError::bad_request("invalid_config", format!("invalid {what}: {e}")))
}

pub async fn create_session(
    State(state): AppStateRef,
    Json(req): Json<SessionRequest>,
) -> ApiResult<(StatusCode, Json<SessionView>)> {
    let entry = state
        .datasets
        .read()
        .expect("dataset registry poisoned")
        .get(&req.dataset)
        .cloned()
        .ok_or_else(|| ApiError::not_found("dataset", &req.dataset))?;
    let session_cfg: SessionConfig = merge(&SessionConfig::default(), req.session_config.as_ref(), "session_config")?;
    let mut model_cfg: Sda2eConfig =
        merge(&Sda2eConfig::for_dimension(entry.dataset.d()), req.model_config.as_ref(), "model_config")?;
    if model_cfg.d != entry.dataset.d() {
        return Err(ApiError::bad_request(
            "invalid_config",
            format!("model d = {} does not match dataset width {}", model_cfg.d, entry.dataset.d()),
        ));
    }
    session_cfg.validate()?;
    model_cfg.validate()?;
    model_cfg.d = entry.dataset.d();
    let relevance = entry.labels.as_ref().map(RelevanceLabels::from_labels);
    if relevance.as_ref().is_some_and(|r| r.anomaly_count() == 0) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "undefined_metric",
            "dataset labels contain no anomaly, so nDCG is undefined",
        ));
    }

    let id = state.next_session_id();
    let journal = match state.journal_path(&id) {
        Some(path) => Journal::create(path)?,
        None => Journal::in_memory(),
    };
    let session = Arc::new(SessionEntry {
        id: id.clone(),
        dataset: entry.name.clone(),
        slot: std::sync::Mutex::new(Slot {
            busy: Some(Phase::Training),
            ..Slot::default()
        }),
    });
    state
        .sessions
        .write()
        .expect("session registry poisoned")
        .insert(id.clone(), session.clone());

    let job_entry = session.clone();
    let dataset = entry.dataset.clone();
    let job = tokio::task::spawn_blocking(move || {
        let result = Session::start(dataset, relevance, session_cfg, model_cfg, journal);
        let mut slot = job_entry.slot.lock().expect("session slot poisoned");
        slot.busy = None;
        match result {
            Ok(s) => slot.session = Some(s),
            Err(e) => {
                tracing::warn!(session = %job_entry.id, error = %e, "session start failed");
                slot.failure = Some(e.to_string());
            }
        }
    });
    if req.wait {
        job.await
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
    }
    let view = session_view(&session, &session.slot.lock().expect("session slot poisoned"));
    Ok((StatusCode::CREATED, Json(view)))
}

fn lookup(state: &AppState, id: &str) -> ApiResult<Arc<SessionEntry>> {
    state
        .sessions
        .read()
        .expect("session registry poisoned")
        .get(id)
        .cloned()
        .ok_or_else(|| ApiError::not_found("session", id))
}

fn session_view(entry: &SessionEntry, slot: &Slot) -> SessionView {
    let phase = slot.phase().unwrap_or(Phase::Training);
    let s = slot.session.as_ref();
    let pending = match (s, slot.busy) {
        (Some(s), None) => s.pending().iter().map(|&r| s.dataset().id(r).to_string()).collect(),
        _ => Vec::new(),
    };
    SessionView {
        id: entry.id.clone(),
        dataset: entry.dataset.clone(),
        phase,
        iterations_done: s.map_or(0, |s| s.records().len()),
        iterations_total: s.map_or(0, |s| s.config().iterations + 1),
        budget: s.map_or(0, |s| s.config().budget),
        queried_total: s.map_or(0, |s| s.records().iter().map(|r| r.queried.len()).sum()),
        pending,
        labels: s.map(|s| {
            let sets = s.sets();
            let normal = sets.normals().len();
            let anomaly = sets.anomalies().len();
            LabelCounts {
                normal,
                anomaly,
                unlabeled: sets.len() - normal - anomaly,
            }
        }),
        pool_size: s.map(|s| s.sets().pool().len()),
        strategy: s.map(|s| s.config().strategy.name().to_string()),
        error: slot.failure.clone(),
    }
}

pub async fn get_session(State(state): AppStateRef, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    let entry = lookup(&state, &id)?;
    let slot = entry.slot.lock().expect("session slot poisoned");
    Ok(Json(session_view(&entry, &slot)))
}

/// The session when it is awaiting labels, otherwise a conflict error.
fn awaiting<'a>(slot: &'a Slot, id: &str) -> ApiResult<&'a Session> {
    if let Some(failure) = &slot.failure {
        return Err(ApiError::conflict("session_failed", failure.clone()));
    }
    match (slot.phase(), slot.session.as_ref()) {
        (Some(Phase::AwaitingLabels), Some(s)) => Ok(s),
        (phase, _) => Err(ApiError::conflict(
            "wrong_phase",
            format!("session {id} is not awaiting labels"),
        )
        .with_detail(serde_json::json!({ "phase": phase }))),
    }
}

fn ready<'a>(slot: &'a Slot, id: &str) -> ApiResult<&'a Session> {
    if let Some(failure) = &slot.failure {
        return Err(ApiError::conflict("session_failed", failure.clone()));
    }
    slot.session
        .as_ref()
        .ok_or_else(|| ApiError::conflict("wrong_phase", format!("session {id} is still training")))
}

pub async fn get_candidates(State(state): AppStateRef, Path(id): Path<String>) -> ApiResult<Json<CandidatesView>> {
    let entry = lookup(&state, &id)?;
    let slot = entry.slot.lock().expect("session slot poisoned");
    let session = awaiting(&slot, &id)?;
    let pending = session.pending();
    if pending.is_empty() {
        return Err(ApiError::conflict("wrong_phase", "all candidates are labeled; advance pending"));
    }
    let dataset = session.dataset();
    let rows = dataset.rows();
    let mut position = vec![0usize; dataset.len()];
    for (p, &r) in session.ranking().iter().enumerate() {
        position[r] = p + 1;
    }
    let metric = session.config().metric;
    let normals = session.sets().normals();
    let anomalies = session.sets().anomalies();
    let k = state.options.neighbours;
    let neighbours = |row: usize, set: &[usize]| -> ApiResult<Vec<Neighbour>> {
        let hits = topk_similar(&rows[row], set.iter().map(|&i| (i, &rows[i])), metric, k)?;
        Ok(hits
            .into_iter()
            .map(|(i, similarity)| Neighbour {
                id: dataset.id(i).to_string(),
                similarity,
            })
            .collect())
    };
    let mut candidates = Vec::with_capacity(pending.len());
    for row in pending {
        let x = dataset.row_f64(row);
        let a = session.model().attention_mask(&x)?;
        let mut active: Vec<usize> = rows[row].ones().collect();
        active.sort_by(|&i, &j| a[j].total_cmp(&a[i]).then(i.cmp(&j)));
        active.truncate(state.options.top_features);
        candidates.push(Candidate {
            id: dataset.id(row).to_string(),
            row,
            score: session.scores()[row],
            rank: position[row],
            top_features: active
                .into_iter()
                .map(|j| FeatureWeight {
                    name: dataset.feature_names()[j].clone(),
                    attention: a[j],
                })
                .collect(),
            nearest_anomalies: neighbours(row, &anomalies)?,
            nearest_normals: neighbours(row, &normals)?,
        });
    }
    Ok(Json(CandidatesView {
        iteration: session.current_iteration(),
        tau: session.selection().map(|s| s.tau),
        candidates,
    }))
}

#[derive(Debug, Deserialize)]
pub struct LabelSubmission {
    pub labels: BTreeMap<String, Label>,
}

pub async fn submit_labels(
    State(state): AppStateRef,
    Path(id): Path<String>,
    Json(req): Json<LabelSubmission>,
) -> ApiResult<Json<LabelsAck>> {
    let entry = lookup(&state, &id)?;
    let mut slot = entry.slot.lock().expect("session slot poisoned");
    let session = awaiting(&slot, &id)?;
    if req.labels.is_empty() {
        return Err(ApiError::bad_request("invalid_argument", "no labels submitted"));
    }
    let pending: HashSet<usize> = session.pending().into_iter().collect();
    let mut rows = Vec::with_capacity(req.labels.len());
    for (row_id, label) in &req.labels {
        let row = session
            .dataset()
            .index_of(row_id)
            .ok_or_else(|| ApiError::bad_request("unknown_id", format!("no row with id {row_id:?}")))?;
        if !pending.contains(&row) {
            let labeled = session.sets().state(row).label().is_some()
                || session.selection().is_some_and(|s| s.candidates.contains(&row));
            return Err(if labeled {
                ApiError::conflict("already_labeled", format!("row {row_id:?} is already labeled"))
            } else {
                ApiError::bad_request("not_pending", format!("row {row_id:?} is not a pending candidate"))
            });
        }
        rows.push((row, *label));
    }
    let session = slot.session.as_mut().expect("checked above");
    for (row, label) in rows {
        session.submit(row, label)?;
    }
    let accepted = req.labels.len();
    if session.ready_to_advance() {
        let snapshot = session.clone();
        slot.busy = Some(Phase::Retraining);
        let job_entry = entry.clone();
        tokio::task::spawn_blocking(move || {
            let mut next = snapshot;
            let result = next.advance();
            let mut slot = job_entry.slot.lock().expect("session slot poisoned");
            slot.busy = None;
            match result {
                Ok(()) => slot.session = Some(next),
                Err(e) => {
                    tracing::warn!(session = %job_entry.id, error = %e, "advance failed");
                    slot.failure = Some(e.to_string());
                }
            }
        });
    }
    let view = session_view(&entry, &slot);
    Ok(Json(LabelsAck {
        accepted,
        phase: view.phase,
        pending: view.pending,
    }))
}

#[derive(Debug, Deserialize)]
pub struct PageQuery {
    pub offset: Option<usize>,
    pub limit: Option<usize>,
}

const DEFAULT_PAGE: usize = 50;
const MAX_PAGE: usize = 1000;

pub async fn get_metrics(
    State(state): AppStateRef,
    Path(id): Path<String>,
    Query(page): Query<PageQuery>,
) -> ApiResult<Json<MetricsView>> {
    let entry = lookup(&state, &id)?;
    let slot = entry.slot.lock().expect("session slot poisoned");
    let session = ready(&slot, &id)?;
    let summary = session.strategy_run().series().and_then(|s| summarize(&[s]).ok());
    Ok(Json(MetricsView {
        strategy: session.config().strategy.name().to_string(),
        series: metric_points(session),
        summary,
        ranking: ranking_page(
            session,
            page.offset.unwrap_or(0),
            page.limit.unwrap_or(DEFAULT_PAGE).min(MAX_PAGE),
        ),
    }))
}

pub async fn get_ranking(
    State(state): AppStateRef,
    Path(id): Path<String>,
    Query(page): Query<PageQuery>,
) -> ApiResult<Json<RankingPage>> {
    let entry = lookup(&state, &id)?;
    let slot = entry.slot.lock().expect("session slot poisoned");
    let session = ready(&slot, &id)?;
    Ok(Json(ranking_page(
        session,
        page.offset.unwrap_or(0),
        page.limit.unwrap_or(DEFAULT_PAGE).min(MAX_PAGE),
    )))
}

/// The run report body, as the CLI writes it (without the metadata line).
pub async fn get_report(State(state): AppStateRef, Path(id): Path<String>) -> ApiResult<String> {
    let entry = lookup(&state, &id)?;
    let slot = entry.slot.lock().expect("session slot poisoned");
    let session = ready(&slot, &id)?;
    Ok(session.report(&entry.dataset).body_json())
}

/// The session journal as JSON lines.
pub async fn get_journal(State(state): AppStateRef, Path(id): Path<String>) -> ApiResult<String> {
    let entry = lookup(&state, &id)?;
    let slot = entry.slot.lock().expect("session slot poisoned");
    let session = ready(&slot, &id)?;
    Ok(session.journal().to_jsonl())
}
