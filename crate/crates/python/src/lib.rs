//! Python bindings. Structured results cross the boundary as JSON-compatible
//! dicts and lists.

use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use wits_core::events::read_events_jsonl;
use wits_core::mtdl::Hyperparams;
use wits_core::recognizer::{self, ScoringMode};
use wits_core::rules::{self, EngineConfig};
use wits_core::signal::{self, PipelineOptions};
use wits_core::{simhome, WitsError};

fn err(e: WitsError) -> PyErr {
    match e {
        WitsError::NonConvergence { .. } | WitsError::Numerical { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Hodrick-Prescott decomposition; returns `(growth, cyclical)`.
#[pyfunction]
#[pyo3(signature = (series, lamb = signal::DEFAULT_LAMBDA))]
fn hp_filter(series: Vec<f64>, lamb: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let d = signal::hp_filter(&series, lamb).map_err(err)?;
    Ok((d.growth, d.cyclical))
}

/// Featurizes sensor CSV text. Returns `(columns, rows, spans)` where spans
/// are `(start_ms, end_ms)` pairs.
#[pyfunction]
#[pyo3(signature = (csv_text, window_ms = signal::DEFAULT_WINDOW_MS, lamb = signal::DEFAULT_LAMBDA, period_ms = None))]
#[allow(clippy::type_complexity)]
fn featurize(
    csv_text: &str,
    window_ms: i64,
    lamb: f64,
    period_ms: Option<i64>,
) -> PyResult<(Vec<String>, Vec<Vec<f64>>, Vec<(i64, i64)>)> {
    let stream = signal::read_sensor_csv(csv_text.as_bytes(), period_ms).map_err(err)?;
    let opts = PipelineOptions {
        window_ms,
        lambda: lamb,
        ..PipelineOptions::default()
    };
    let (f, spans) = signal::featurize_stream(&stream, &opts).map_err(err)?;
    let rows = f.data.row_iter().map(|r| r.iter().copied().collect()).collect();
    Ok((f.columns, rows, spans.iter().map(|s| (s.start_ms, s.end_ms)).collect()))
}

/// A trained recognizer.
#[pyclass(name = "Model", module = "wits")]
struct PyModel {
    inner: wits_core::mtdl::Model,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: wits_core::mtdl::Model::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels.clone()
    }

    #[getter]
    fn epsilon(&self) -> Option<f64> {
        self.inner.epsilon
    }

    #[getter]
    fn j_trace(&self) -> Vec<f64> {
        self.inner.j_trace.clone()
    }

    /// Classifies feature rows. Returns one dict per row with `label`,
    /// `scores`, `normality` and `abnormal`.
    #[pyo3(signature = (rows, mode = "full", epsilon = None))]
    fn classify<'py>(
        &self,
        py: Python<'py>,
        rows: Vec<Vec<f64>>,
        mode: &str,
        epsilon: Option<f64>,
    ) -> PyResult<Vec<Bound<'py, pyo3::types::PyDict>>> {
        let mode: ScoringMode = mode.parse().map_err(err)?;
        let eps = epsilon.or(self.inner.epsilon).unwrap_or(f64::INFINITY);
        let results = recognizer::classify(&matrix(&rows)?, &self.inner, mode, eps).map_err(err)?;
        results
            .into_iter()
            .map(|r| {
                let d = pyo3::types::PyDict::new(py);
                d.set_item("label", r.label.name)?;
                d.set_item("scores", r.scores)?;
                d.set_item("normality", r.normality)?;
                d.set_item("abnormal", r.abnormal)?;
                Ok(d)
            })
            .collect()
    }
}

/// Fits a model to labeled feature rows. `hyper` is a JSON object of
/// hyperparameter overrides. With `quantile`, the threshold is set from
/// out-of-fold training scores.
#[pyfunction]
#[pyo3(signature = (rows, labels, classes = None, hyper = None, quantile = None, folds = 5))]
fn train(
    py: Python<'_>,
    rows: Vec<Vec<f64>>,
    labels: Vec<String>,
    classes: Option<Vec<String>>,
    hyper: Option<&str>,
    quantile: Option<f64>,
    folds: usize,
) -> PyResult<PyModel> {
    let x = matrix(&rows)?;
    let hyper: Hyperparams = match hyper {
        Some(text) => serde_json::from_str(text).map_err(json_err)?,
        None => Hyperparams::default(),
    };
    let classes = classes.unwrap_or_else(|| {
        let mut c: Vec<String> = Vec::new();
        for l in &labels {
            if !c.contains(l) {
                c.push(l.clone());
            }
        }
        c
    });
    py.detach(|| {
        let mut model = recognizer::fit_model(&x, &labels, &classes, &hyper)?;
        if let Some(q) = quantile {
            let scores = recognizer::cross_fit_scores(&x, &labels, &classes, &hyper, folds, ScoringMode::Full)?;
            model.epsilon = Some(recognizer::calibrate_threshold(&scores, q)?);
        }
        Ok(PyModel { inner: model })
    })
    .map_err(err)
}

/// Parses rule text and returns it in normalized form.
#[pyfunction]
fn check_rules(text: &str) -> PyResult<String> {
    Ok(rules::parse_rules(text).map_err(err)?.to_string())
}

/// Runs rules over JSONL events; returns the action log as JSON lines.
#[pyfunction]
#[pyo3(signature = (rules_text, events_jsonl, until = None, tz_offset_min = 0))]
fn run_rules(rules_text: &str, events_jsonl: &str, until: Option<i64>, tz_offset_min: i64) -> PyResult<Vec<String>> {
    let set = rules::parse_rules(rules_text).map_err(err)?;
    let events = read_events_jsonl(events_jsonl.as_bytes()).map_err(err)?;
    let config = EngineConfig {
        tz_offset_ms: tz_offset_min * 60_000,
        ..EngineConfig::default()
    };
    let log = rules::run(&set, events, until, config).map_err(err)?;
    log.iter()
        .map(|r| serde_json::to_string(r).map_err(json_err))
        .collect()
}

/// Generates a synthetic home. Returns `(sensors_csv, labels_csv,
/// events_jsonl)` text.
#[pyfunction]
#[pyo3(signature = (script_json = None, seed = None))]
fn simulate(script_json: Option<&str>, seed: Option<u64>) -> PyResult<(String, String, String)> {
    let mut script: simhome::ScenarioScript = match script_json {
        Some(t) => serde_json::from_str(t).map_err(json_err)?,
        None => simhome::ScenarioScript::default(),
    };
    if let Some(s) = seed {
        script.seed = s;
    }
    let planted = script.plant().map_err(err)?;
    let g = simhome::generate(&script, &planted).map_err(err)?;
    let mut sensors = Vec::new();
    signal::write_sensor_csv(&mut sensors, &g.stream).map_err(err)?;
    let mut labels = Vec::new();
    signal::write_labels_csv(&mut labels, &g.segments).map_err(err)?;
    let mut events = Vec::new();
    wits_core::events::write_events_jsonl(&mut events, &g.events).map_err(err)?;
    let text = |b: Vec<u8>| String::from_utf8(b).expect("writers emit UTF-8");
    Ok((text(sensors), text(labels), text(events)))
}

#[pymodule]
fn wits(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(hp_filter, m)?)?;
    m.add_function(wrap_pyfunction!(featurize, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(check_rules, m)?)?;
    m.add_function(wrap_pyfunction!(run_rules, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_class::<PyModel>()?;
    Ok(())
}
