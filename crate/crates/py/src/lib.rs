//! Python bindings: datasets, the model, similarity and nDCG, and
//! active-learning sessions. Config overrides are keyword arguments named
//! after the Rust config fields.

use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::de::DeserializeOwned;
use serde::Serialize;

use sda2e_core::active::{self, Journal, Phase, SessionConfig, SimulatedOracle};
use sda2e_core::data::{self, BinaryDataset, Label, LabelMap, SyntheticSpec};
use sda2e_core::eval::RelevanceLabels;
use sda2e_core::sda2e::{self as model, Sda2eConfig, Sda2eModel, TrainOptions};
use sda2e_core::simsearch::{sim_metric, BitVector, SimilarityMetric};
use sda2e_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Training { .. } | Error::NonFinite { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_loads(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// Applies keyword overrides to `base`; unknown keys are rejected.
fn with_overrides<T: Serialize + DeserializeOwned>(
    py: Python<'_>,
    base: &T,
    kwargs: Option<&Bound<'_, PyDict>>,
    skip: &[&str],
) -> PyResult<(T, Vec<String>)> {
    let mut value = serde_json::to_value(base).expect("config serializes");
    let mut unused = Vec::new();
    if let Some(kwargs) = kwargs {
        let text: String = py.import("json")?.call_method1("dumps", (kwargs,))?.extract()?;
        let patch: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let obj = value.as_object_mut().expect("config is an object");
        for (k, v) in patch {
            if skip.contains(&k.as_str()) {
                continue;
            }
            match obj.get_mut(&k) {
                Some(slot) => *slot = v,
                None => unused.push(k),
            }
        }
    }
    let config = serde_json::from_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((config, unused))
}

fn reject_unknown(unknown: &[String]) -> PyResult<()> {
    match unknown.first() {
        Some(k) => Err(PyValueError::new_err(format!("unknown option {k:?}"))),
        None => Ok(()),
    }
}

fn parse_labels(dataset: &BinaryDataset, labels: Vec<String>) -> PyResult<LabelMap> {
    if labels.len() != dataset.len() {
        return Err(PyValueError::new_err(format!(
            "{} labels for {} rows",
            labels.len(),
            dataset.len()
        )));
    }
    let parsed = labels
        .iter()
        .map(|l| l.parse::<Label>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(py_err)?;
    Ok(LabelMap::new(parsed))
}

/// A binary dataset with row ids.
#[pyclass(module = "sda2e", frozen)]
pub struct Dataset {
    inner: Arc<BinaryDataset>,
}

#[pymethods]
impl Dataset {
    #[staticmethod]
    fn from_csv(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(data::load_csv(path).map_err(py_err)?),
        })
    }

    #[staticmethod]
    fn from_csv_string(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(data::parse_csv(text.as_bytes()).map_err(py_err)?),
        })
    }

    /// Rows of 0/1 integers, with optional ids.
    #[staticmethod]
    #[pyo3(signature = (rows, ids=None))]
    fn from_rows(rows: Vec<Vec<u8>>, ids: Option<Vec<String>>) -> PyResult<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let ids = ids.unwrap_or_else(|| (0..rows.len()).map(|i| format!("r{i}")).collect());
        let mut bits = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d || row.iter().any(|&v| v > 1) {
                return Err(PyValueError::new_err(format!("row {i} is not a 0/1 row of width {d}")));
            }
            bits.push(BitVector::from_bools(&row.iter().map(|&v| v == 1).collect::<Vec<_>>()));
        }
        Ok(Self {
            inner: Arc::new(BinaryDataset::new(ids, bits, d, Vec::new()).map_err(py_err)?),
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn ids(&self) -> Vec<String> {
        self.inner.ids().to_vec()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names().to_vec()
    }

    #[getter]
    fn checksum(&self) -> String {
        self.inner.checksum()
    }

    fn row(&self, i: usize) -> PyResult<Vec<u8>> {
        if i >= self.inner.len() {
            return Err(PyValueError::new_err(format!("row {i} out of range")));
        }
        Ok(self.inner.row_f64(i).into_iter().map(|v| v as u8).collect())
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv_string()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(rows={}, d={})", self.inner.len(), self.inner.d())
    }
}

/// Seeded synthetic dataset; returns `(dataset, labels)` with labels as
/// `"normal"` / `"anomaly"` strings.
#[pyfunction]
#[pyo3(signature = (**kwargs))]
fn synthetic(py: Python<'_>, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<(Dataset, Vec<String>)> {
    let (spec, unknown): (SyntheticSpec, _) = with_overrides(py, &SyntheticSpec::default(), kwargs, &[])?;
    reject_unknown(&unknown)?;
    let (ds, labels) = data::generate_synthetic(&spec).map_err(py_err)?;
    let labels = labels.as_slice().iter().map(|l| l.as_str().to_string()).collect();
    Ok((Dataset { inner: Arc::new(ds) }, labels))
}

/// The attention-gated adversarial autoencoder.
#[pyclass(module = "sda2e")]
pub struct Model {
    inner: Sda2eModel,
}

#[pymethods]
impl Model {
    /// Untrained model for width `d`; keyword arguments override config fields.
    #[new]
    #[pyo3(signature = (d, **kwargs))]
    fn new(py: Python<'_>, d: usize, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let (config, unknown): (Sda2eConfig, _) = with_overrides(py, &Sda2eConfig::for_dimension(d), kwargs, &["d"])?;
        reject_unknown(&unknown)?;
        Ok(Self {
            inner: Sda2eModel::new(config).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: model::load_checkpoint(path).map_err(py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        model::save_checkpoint(&self.inner, path).map_err(py_err)
    }

    /// Config as a dict.
    #[getter]
    fn config(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        json_loads(py, &serde_json::to_string(&self.inner.config).expect("config serializes"))
    }

    /// Trains from the current parameters for `epochs` (config value when
    /// omitted); returns one dict of losses per epoch.
    #[pyo3(signature = (dataset, epochs=None, seed=None))]
    fn fit(&mut self, py: Python<'_>, dataset: &Dataset, epochs: Option<usize>, seed: Option<u64>) -> PyResult<Py<PyAny>> {
        let rows = dataset.inner.dense_rows();
        let epochs = epochs.unwrap_or(self.inner.config.epochs);
        let seed = seed.unwrap_or(self.inner.config.seed);
        let history = py
            .detach(|| model::fit(&mut self.inner, &rows, epochs, seed, TrainOptions::default()))
            .map_err(py_err)?;
        json_loads(py, &serde_json::to_string(&history.epochs).expect("history serializes"))
    }

    fn score(&self, py: Python<'_>, dataset: &Dataset) -> PyResult<Vec<f64>> {
        py.detach(|| self.inner.score_all(&dataset.inner)).map_err(py_err)
    }

    fn score_row(&self, row: Vec<f64>) -> PyResult<f64> {
        self.inner.anomaly_score(&row).map_err(py_err)
    }

    fn attention(&self, row: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.attention_mask(&row).map_err(py_err)
    }

    /// Fraction of (row, latent unit) pairs with a positive generator latent.
    fn activation_frequency(&self, dataset: &Dataset) -> PyResult<f64> {
        model::latent_activation_frequency(&self.inner, &dataset.inner.dense_rows()).map_err(py_err)
    }
}

/// Similarity of two 0/1 rows under `metric` (nm1, jaccard, dice, hamming, cosine).
#[pyfunction]
#[pyo3(signature = (a, b, metric="nm1"))]
fn similarity(a: Vec<bool>, b: Vec<bool>, metric: &str) -> PyResult<f64> {
    let metric: SimilarityMetric = metric.parse().map_err(py_err)?;
    sim_metric(&BitVector::from_bools(&a), &BitVector::from_bools(&b), metric).map_err(py_err)
}

/// nDCG of a ranking of row indices against boolean relevance.
#[pyfunction]
#[pyo3(signature = (ranking, relevant, cutoff=None))]
fn ndcg(ranking: Vec<usize>, relevant: Vec<bool>, cutoff: Option<usize>) -> PyResult<f64> {
    sda2e_core::eval::ndcg(&ranking, &RelevanceLabels::new(relevant), cutoff).map_err(py_err)
}

/// Runs simulated-oracle sessions for each strategy and returns the report
/// as a dict. Keyword arguments override session and model config fields.
#[pyfunction]
#[pyo3(signature = (dataset, labels, strategies=None, name="dataset", **kwargs))]
fn run_active(
    py: Python<'_>,
    dataset: &Dataset,
    labels: Vec<String>,
    strategies: Option<Vec<String>>,
    name: &str,
    kwargs: Option<&Bound<'_, PyDict>>,
) -> PyResult<Py<PyAny>> {
    let labels = parse_labels(&dataset.inner, labels)?;
    let (session_cfg, model_cfg) = configs(py, dataset.inner.d(), kwargs)?;
    let strategies = match strategies {
        Some(list) => list
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<_>, _>>()
            .map_err(py_err)?,
        None => vec![session_cfg.strategy],
    };
    let ds = dataset.inner.clone();
    let (report, _) = py
        .detach(|| active::run_strategies(name, ds, &labels, &strategies, &session_cfg, &model_cfg))
        .map_err(py_err)?;
    json_loads(py, &report.body_json())
}

fn configs(py: Python<'_>, d: usize, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<(SessionConfig, Sda2eConfig)> {
    let (session_cfg, unknown_s): (SessionConfig, _) = with_overrides(py, &SessionConfig::default(), kwargs, &[])?;
    let (model_cfg, unknown_m): (Sda2eConfig, _) = with_overrides(py, &Sda2eConfig::for_dimension(d), kwargs, &["d"])?;
    let unknown: Vec<String> = unknown_s.into_iter().filter(|k| unknown_m.contains(k)).collect();
    reject_unknown(&unknown)?;
    Ok((session_cfg, model_cfg))
}

/// Interactive active-learning session driven from Python.
#[pyclass(module = "sda2e")]
pub struct Session {
    inner: active::Session,
}

#[pymethods]
impl Session {
    /// Trains the cold-start model. `labels`, when given, are only used to
    /// compute nDCG per iteration.
    #[new]
    #[pyo3(signature = (dataset, labels=None, **kwargs))]
    fn new(py: Python<'_>, dataset: &Dataset, labels: Option<Vec<String>>, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let relevance = labels
            .map(|l| parse_labels(&dataset.inner, l).map(|m| RelevanceLabels::from_labels(&m)))
            .transpose()?;
        let (session_cfg, model_cfg) = configs(py, dataset.inner.d(), kwargs)?;
        let ds = dataset.inner.clone();
        let inner = py
            .detach(|| active::Session::start(ds, relevance, session_cfg, model_cfg, Journal::in_memory()))
            .map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn phase(&self) -> &'static str {
        match self.inner.phase() {
            Phase::Training => "training",
            Phase::AwaitingLabels => "awaiting-labels",
            Phase::Retraining => "retraining",
            Phase::Complete => "complete",
        }
    }

    #[getter]
    fn iteration(&self) -> usize {
        self.inner.current_iteration()
    }

    /// Ids of the candidates still waiting for a label.
    fn pending(&self) -> Vec<String> {
        self.inner
            .pending()
            .into_iter()
            .map(|r| self.inner.dataset().id(r).to_string())
            .collect()
    }

    fn submit(&mut self, id: &str, label: &str) -> PyResult<()> {
        let label: Label = label.parse().map_err(py_err)?;
        self.inner.submit_id(id, label).map_err(py_err)
    }

    /// Runs the strategy step and retraining once every candidate is labeled.
    fn advance(&mut self, py: Python<'_>) -> PyResult<()> {
        let inner = &mut self.inner;
        py.detach(|| inner.advance()).map_err(py_err)
    }

    fn scores(&self) -> Vec<f64> {
        self.inner.scores().to_vec()
    }

    fn ranking(&self) -> Vec<String> {
        let ds = self.inner.dataset();
        self.inner.ranking().iter().map(|&r| ds.id(r).to_string()).collect()
    }

    fn ndcg_series(&self) -> Vec<Option<f64>> {
        self.inner.records().iter().map(|r| r.ndcg).collect()
    }

    /// Run report as a dict.
    #[pyo3(signature = (name="dataset"))]
    fn report(&self, py: Python<'_>, name: &str) -> PyResult<Py<PyAny>> {
        json_loads(py, &self.inner.report(name).body_json())
    }

    fn journal(&self) -> String {
        self.inner.journal().to_jsonl()
    }
}

/// Drives a session to completion answering from `labels`.
#[pyfunction]
fn simulate(py: Python<'_>, session: &mut Session, labels: Vec<String>) -> PyResult<()> {
    let labels = parse_labels(session.inner.dataset(), labels)?;
    let mut oracle = SimulatedOracle::new(labels);
    let inner = &mut session.inner;
    py.detach(|| -> sda2e_core::Result<()> {
        use sda2e_core::active::Oracle;
        while inner.phase() == Phase::AwaitingLabels {
            for row in inner.pending() {
                let label = oracle.label(row)?;
                inner.submit(row, label)?;
            }
            inner.advance()?;
        }
        Ok(())
    })
    .map_err(py_err)
}

#[pymodule]
fn sda2e(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Model>()?;
    m.add_class::<Session>()?;
    m.add_function(wrap_pyfunction!(synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(similarity, m)?)?;
    m.add_function(wrap_pyfunction!(ndcg, m)?)?;
    m.add_function(wrap_pyfunction!(run_active, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
