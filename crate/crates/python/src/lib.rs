//! Python bindings: `import acil`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use acil_core::classifier::{
    load_checkpoint, save_checkpoint, train_episode, ModelInit, ModelParams, TrainConfig,
    TrainingSet,
};
use acil_core::config::{self, read_config_file};
use acil_core::datastream::{build_stream, Sample};
use acil_core::harness::{run_sweep, MetricsRecord};
use acil_core::selection::{self, Strategy};
use acil_core::{seed, Error};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Config { .. } | Error::Contract(_) | Error::Parse { .. } | Error::Schema { .. } => {
            PyValueError::new_err(err.to_string())
        }
        Error::Io { .. } => PyOSError::new_err(err.to_string()),
        Error::Divergence { .. } => PyRuntimeError::new_err(err.to_string()),
    }
}

fn layers(
    config_path: Option<PathBuf>,
    overrides: Vec<String>,
) -> PyResult<acil_core::harness::ExperimentConfig> {
    let file = match config_path {
        Some(p) => read_config_file(&p).map_err(to_py)?,
        None => Vec::new(),
    };
    let sets = overrides
        .iter()
        .map(|o| config::parse_override(o))
        .collect::<Result<Vec<_>, _>>()
        .map_err(to_py)?;
    config::build_config(&[&file, &sets]).map_err(to_py)
}

/// `(k_unlabeled, k_exemplar)` for a budget `k`.
#[pyfunction]
fn split_budget(k: usize, episode_classes: usize, exemplar_classes: usize) -> (usize, usize) {
    let s = selection::split_budget(k, episode_classes, exemplar_classes);
    (s.k_unlabeled, s.k_exemplar)
}

/// Spread `total` over classes, capped by availability (`{class: count}`).
#[pyfunction]
fn per_class_budgets(total: usize, available: BTreeMap<usize, usize>) -> BTreeMap<usize, usize> {
    let classes: Vec<usize> = available.keys().copied().collect();
    selection::per_class_budgets(total, &classes, &available)
}

#[pyfunction]
fn entropy(p: Vec<f64>) -> PyResult<f64> {
    acil_core::classifier::entropy(&p).map_err(to_py)
}

#[pyfunction]
fn weighted_variance(points: Vec<Vec<f64>>, weights: Vec<f64>) -> PyResult<f64> {
    selection::weighted_variance(&points, &weights).map_err(to_py)
}

/// Ids of the cluster representatives picked by entropy-weighted k-means.
#[pyfunction]
fn weighted_kmeans_select(
    ids: Vec<u64>,
    embeddings: Vec<Vec<f64>>,
    weights: Vec<f64>,
    budget: usize,
    seed: u64,
) -> PyResult<Vec<u64>> {
    selection::weighted_kmeans_select(&ids, &embeddings, &weights, budget, seed).map_err(to_py)
}

fn samples_dict<'py>(py: Python<'py>, samples: &[Sample]) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("ids", samples.iter().map(|s| s.id).collect::<Vec<_>>())?;
    d.set_item(
        "features",
        samples
            .iter()
            .map(|s| s.features.clone())
            .collect::<Vec<_>>(),
    )?;
    d.set_item(
        "labels",
        samples.iter().map(|s| s.true_label).collect::<Vec<_>>(),
    )?;
    Ok(d)
}

/// Episodes of the stream described by the config, as dicts with
/// `index`, `classes`, `labeled`, `unlabeled` and `test` entries.
#[pyfunction]
#[pyo3(signature = (overrides = Vec::new(), config_path = None))]
fn generate_stream<'py>(
    py: Python<'py>,
    overrides: Vec<String>,
    config_path: Option<PathBuf>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = layers(config_path, overrides)?;
    let stream_cfg = acil_core::datastream::StreamConfig {
        seed: cfg.seed,
        ..cfg.stream
    };
    let episodes = build_stream(&stream_cfg).map_err(to_py)?;
    episodes
        .iter()
        .map(|e| {
            let d = PyDict::new(py);
            d.set_item("index", e.index)?;
            d.set_item("classes", e.classes.clone())?;
            d.set_item("labeled", samples_dict(py, &e.labeled)?)?;
            d.set_item("unlabeled", samples_dict(py, &e.unlabeled)?)?;
            d.set_item("test", samples_dict(py, &e.test)?)?;
            Ok(d)
        })
        .collect()
}

fn record_dict<'py>(py: Python<'py>, r: &MetricsRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("strategy", r.strategy.as_str())?;
    d.set_item("seed", r.seed)?;
    d.set_item("episode", r.episode)?;
    d.set_item("incremental_accuracy", r.incremental_accuracy)?;
    d.set_item("retention", r.retention)?;
    d.set_item("annotated_this_episode", r.annotated_this_episode)?;
    d.set_item("cumulative_annotated", r.cumulative_annotated)?;
    d.set_item("exemplars", r.exemplars)?;
    d.set_item("exemplars_from_unlabeled", r.exemplars_from_unlabeled)?;
    d.set_item("first_epoch_loss", r.first_epoch_loss)?;
    d.set_item("final_epoch_loss", r.final_epoch_loss)?;
    Ok(d)
}

/// Runs the configured experiment (or a sweep over `strategies`) and returns
/// one dict per (strategy, seed, episode). Diverged replicas are skipped.
#[pyfunction]
#[pyo3(signature = (overrides = Vec::new(), config_path = None, strategies = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    overrides: Vec<String>,
    config_path: Option<PathBuf>,
    strategies: Option<Vec<String>>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = layers(config_path, overrides)?;
    let strategies = match strategies {
        Some(ids) => ids
            .iter()
            .map(|s| s.parse::<Strategy>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(to_py)?,
        None => vec![cfg.strategy],
    };
    let results = py.detach(|| run_sweep(&cfg, &strategies)).map_err(to_py)?;
    results.records.iter().map(|r| record_dict(py, r)).collect()
}

/// Classifier with an embedding layer and a linear head over class ids.
#[pyclass(name = "Model", module = "acil")]
struct PyModel {
    inner: ModelParams,
}

#[pymethods]
impl PyModel {
    /// Randomly initialised model.
    #[new]
    #[pyo3(signature = (input_dim, classes, hidden = 32, seed = 0))]
    fn new(input_dim: usize, classes: Vec<usize>, hidden: usize, seed: u64) -> PyResult<Self> {
        let mut rng = seed::rng(seed);
        let inner = ModelParams::init(input_dim, hidden, classes, &mut rng).map_err(to_py)?;
        Ok(PyModel { inner })
    }

    /// Trains a fresh model on `(features, labels)` with default settings,
    /// adjusted by `train.*` overrides such as `"train.epochs=50"`.
    #[staticmethod]
    #[pyo3(signature = (features, labels, overrides = Vec::new(), seed = 0))]
    fn fit(
        py: Python<'_>,
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        overrides: Vec<String>,
        seed: u64,
    ) -> PyResult<Self> {
        if features.len() != labels.len() || features.is_empty() {
            return Err(PyValueError::new_err(
                "features and labels must be non-empty and of equal length",
            ));
        }
        let cfg = layers(None, overrides)?;
        let train = TrainConfig { seed, ..cfg.train };
        let samples: Vec<Sample> = features
            .into_iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (f, y))| Sample::new(i as u64, f, y).annotated())
            .collect();
        let mut classes: Vec<usize> = samples.iter().map(|s| s.true_label).collect();
        classes.sort_unstable();
        classes.dedup();
        let input_dim = samples[0].features.len();
        let data = TrainingSet {
            labeled: samples.iter().collect(),
            exemplars: Vec::new(),
        };
        let outcome = py
            .detach(|| train_episode(ModelInit::Fresh { input_dim, classes }, &data, None, &train))
            .map_err(to_py)?;
        Ok(PyModel {
            inner: outcome.model,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel {
            inner: load_checkpoint(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&path, &self.inner).map_err(to_py)
    }

    #[getter]
    fn classes(&self) -> Vec<usize> {
        self.inner.classes().to_vec()
    }

    #[getter]
    fn embed_dim(&self) -> usize {
        self.inner.embed_dim()
    }

    fn embed(&self, features: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.embed_features(&features).map_err(to_py)
    }

    /// Class probabilities in the order of `classes`.
    fn predict_proba(&self, features: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.predict_proba_features(&features).map_err(to_py)
    }

    fn predict(&self, features: Vec<f64>) -> PyResult<usize> {
        self.inner
            .predict(&Sample::new(0, features, 0))
            .map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(input_dim={}, embed_dim={}, classes={:?})",
            self.inner.input_dim(),
            self.inner.embed_dim(),
            self.inner.classes()
        )
    }
}

#[pymodule]
fn acil(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(split_budget, m)?)?;
    m.add_function(wrap_pyfunction!(per_class_budgets, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_variance, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_kmeans_select, m)?)?;
    m.add_function(wrap_pyfunction!(generate_stream, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_class::<PyModel>()?;
    m.add(
        "STRATEGIES",
        Strategy::ALL.iter().map(|s| s.as_str()).collect::<Vec<_>>(),
    )?;
    Ok(())
}
