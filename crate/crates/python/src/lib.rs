//! Python bindings: datasets, rank metrics, reject-inference fits and the
//! end-to-end experiment.

use std::path::PathBuf;

use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use credit_ri::config::parse_config;
use credit_ri::dataset::{self, CsvRoles, RejectionConfig};
use credit_ri::metrics;
use credit_ri::pipeline::{self, ExperimentConfig, ExperimentReport};
use credit_ri::reject_inference::{self, ReclassCutoff, Technique, TechniqueConfig};
use credit_ri::scoring;
use credit_ri::Error;

fn to_py(err: Error) -> PyErr {
    let message = err.to_string();
    match err.root() {
        Error::Io { .. } => PyOSError::new_err(message),
        Error::Numerical(_) => PyArithmeticError::new_err(message),
        _ => PyValueError::new_err(message),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for credit_ri::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// Applicant population with label-visibility rules.
#[pyclass(name = "Dataset", module = "credit_ri", frozen)]
struct PyDataset {
    inner: dataset::Dataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    #[pyo3(signature = (path, outcome = "outcome", decision = None))]
    fn load_csv(path: PathBuf, outcome: &str, decision: Option<String>) -> PyResult<Self> {
        let roles = CsvRoles {
            outcome: outcome.to_string(),
            decision,
        };
        Ok(PyDataset {
            inner: dataset::load_csv(&path, &roles).py_err()?,
        })
    }

    /// Fully labelled synthetic population from a logistic generator.
    #[staticmethod]
    #[pyo3(signature = (n, k, good_rate = 0.9, seed = 0))]
    fn synthetic(n: usize, k: usize, good_rate: f64, seed: u64) -> PyResult<Self> {
        Ok(PyDataset {
            inner: dataset::generate_synthetic(n, k, good_rate, seed).py_err()?,
        })
    }

    /// Copy of this population with a simulated historical rejection.
    #[pyo3(signature = (rate = 0.05, seed = 0, extra_fraction = 0.10))]
    fn simulate_rejection(&self, rate: f64, seed: u64, extra_fraction: f64) -> PyResult<Self> {
        let cfg = RejectionConfig { rate, extra_fraction };
        let sim = dataset::simulate_rejection_with(&self.inner, &cfg, seed).py_err()?;
        Ok(PyDataset { inner: sim.dataset })
    }

    #[pyo3(signature = (path, outcome = "outcome", decision = "decision", export_oracle = false))]
    fn write_csv(&self, path: PathBuf, outcome: &str, decision: &str, export_oracle: bool) -> PyResult<()> {
        let roles = CsvRoles {
            outcome: outcome.to_string(),
            decision: Some(decision.to_string()),
        };
        self.inner.write_csv(&path, &roles, export_oracle).py_err()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n={}, accepted={}, rejected={}, features={})",
            self.inner.len(),
            self.inner.n_accepted(),
            self.inner.n_rejected(),
            self.inner.feature_count()
        )
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.schema().names().to_vec()
    }

    #[getter]
    fn n_accepted(&self) -> usize {
        self.inner.n_accepted()
    }

    #[getter]
    fn n_rejected(&self) -> usize {
        self.inner.n_rejected()
    }

    #[getter]
    fn oracle_mode(&self) -> bool {
        self.inner.oracle_mode()
    }

    fn ids(&self) -> Vec<usize> {
        self.inner.ids()
    }

    fn accepted_ids(&self) -> Vec<usize> {
        self.inner.accepted_ids()
    }

    fn rejected_ids(&self) -> Vec<usize> {
        self.inner.rejected_ids()
    }

    fn decision(&self, id: usize) -> PyResult<u8> {
        self.check(id)?;
        Ok(self.inner.decision(id))
    }

    /// Observed outcome; raises for a masked reject (and counts the attempt).
    fn outcome(&self, id: usize) -> PyResult<u8> {
        self.check(id)?;
        self.inner.outcome(id).py_err()
    }

    /// Outcome if visible, else None, without touching the audit.
    fn visible_outcome(&self, id: usize) -> PyResult<Option<u8>> {
        self.check(id)?;
        Ok(self.inner.visible_outcome(id))
    }

    fn audit<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let a = self.inner.audit();
        let d = PyDict::new(py);
        d.set_item("illegal_reads", a.illegal_reads)?;
        d.set_item("unmask_events", a.unmask_events)?;
        d.set_item("oracle_reads", a.oracle_reads)?;
        Ok(d)
    }
}

impl PyDataset {
    fn check(&self, id: usize) -> PyResult<()> {
        if id < self.inner.len() {
            Ok(())
        } else {
            Err(PyValueError::new_err(format!("id {id} out of range")))
        }
    }
}

/// Fitted scorecard: encoder plus ridge logistic coefficients.
#[pyclass(name = "ScoreModel", module = "credit_ri", frozen)]
struct PyScoreModel {
    inner: scoring::ScoreModel,
}

#[pymethods]
impl PyScoreModel {
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(PyScoreModel {
            inner: scoring::ScoreModel::from_text(text).py_err()?,
        })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn intercept(&self) -> f64 {
        self.inner.intercept
    }

    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.inner.coefficients.clone()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.diagnostics.converged
    }

    /// Probability of a good outcome for each id (all records by default).
    #[pyo3(signature = (dataset, ids = None))]
    fn score(&self, dataset: &PyDataset, ids: Option<Vec<usize>>) -> PyResult<Vec<f64>> {
        let ids = ids.unwrap_or_else(|| dataset.inner.ids());
        if let Some(id) = ids.iter().find(|&&id| id >= dataset.inner.len()) {
            return Err(PyValueError::new_err(format!("id {id} out of range")));
        }
        self.inner.score_ids(&dataset.inner, &ids).py_err()
    }
}

/// Ridge logistic fit on observed outcomes of `ids` (all accepted by default).
#[pyfunction]
#[pyo3(signature = (dataset, ids = None, weights = None, lam = 1.0))]
fn fit_logistic(
    py: Python<'_>,
    dataset: &PyDataset,
    ids: Option<Vec<usize>>,
    weights: Option<Vec<f64>>,
    lam: f64,
) -> PyResult<PyScoreModel> {
    let ids = ids.unwrap_or_else(|| dataset.inner.accepted_ids());
    let weights = weights.unwrap_or_else(|| vec![1.0; ids.len()]);
    let ds = &dataset.inner;
    let inner = py
        .detach(|| scoring::fit_logistic(ds, &ids, &weights, lam, 0))
        .py_err()?;
    Ok(PyScoreModel { inner })
}

#[pyclass(name = "TechniqueFit", module = "credit_ri", frozen)]
struct PyTechniqueFit {
    inner: reject_inference::TechniqueFit,
    config: TechniqueConfig,
}

#[pymethods]
impl PyTechniqueFit {
    #[getter]
    fn technique(&self) -> &'static str {
        self.inner.technique.tag()
    }

    #[getter]
    fn model(&self) -> PyScoreModel {
        PyScoreModel {
            inner: self.inner.model.clone(),
        }
    }

    #[getter]
    fn training_size(&self) -> usize {
        self.inner.provenance.training_size
    }

    #[getter]
    fn control_sample(&self) -> Vec<usize> {
        self.inner.provenance.control_sample.clone()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.provenance.warnings.clone()
    }

    /// Model document followed by the provenance block.
    fn to_text(&self) -> String {
        self.inner.to_text(&self.config)
    }
}

/// Fits one reject-inference technique. `technique` is a tag such as
/// "extrapolation", "augmentation", "parcelling" or "gc2"; `reclass_cutoff`
/// accepts a number or "prior".
#[pyfunction]
#[pyo3(signature = (
    dataset, technique, ids = None, *, bands = 20, reclass_cutoff = None, kappa = 2.0,
    control_fraction = 0.3, lam = 1.0, seed = 0
))]
#[allow(clippy::too_many_arguments)]
fn fit_technique(
    py: Python<'_>,
    dataset: &PyDataset,
    technique: &str,
    ids: Option<Vec<usize>>,
    bands: usize,
    reclass_cutoff: Option<&Bound<'_, PyAny>>,
    kappa: f64,
    control_fraction: f64,
    lam: f64,
    seed: u64,
) -> PyResult<PyTechniqueFit> {
    let technique: Technique = technique.parse().py_err()?;
    let mut cfg = TechniqueConfig::new(technique);
    cfg.bands = bands;
    cfg.kappa = kappa;
    cfg.control_fraction = control_fraction;
    cfg.lambda = lam;
    cfg.seed = seed;
    if let Some(c) = reclass_cutoff {
        cfg.reclass_cutoff = match c.extract::<f64>() {
            Ok(v) => ReclassCutoff::Fixed(v),
            Err(_) if c.extract::<String>().is_ok_and(|s| s == "prior") => ReclassCutoff::PriorMatched,
            Err(_) => return Err(PyValueError::new_err("reclass_cutoff must be a number or \"prior\"")),
        };
    }
    let ids = ids.unwrap_or_else(|| dataset.inner.ids());
    let ds = &dataset.inner;
    let inner = py.detach(|| reject_inference::fit_technique(ds, &ids, &cfg)).py_err()?;
    Ok(PyTechniqueFit { inner, config: cfg })
}

#[pyfunction]
fn roc_auc(scores: Vec<f64>, outcomes: Vec<u8>) -> PyResult<f64> {
    metrics::roc_auc(&scores, &outcomes).py_err()
}

#[pyfunction]
fn ks_statistic(scores: Vec<f64>, outcomes: Vec<u8>) -> PyResult<f64> {
    metrics::ks_statistic(&scores, &outcomes).py_err()
}

/// AUC, KS, banded GINI, KI and classification rate as a dict.
#[pyfunction]
#[pyo3(signature = (scores, outcomes, bands = 20))]
fn global_indicators<'py>(
    py: Python<'py>,
    scores: Vec<f64>,
    outcomes: Vec<u8>,
    bands: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let g = metrics::global_indicators(&scores, &outcomes, bands).py_err()?;
    let d = PyDict::new(py);
    d.set_item("auc", g.auc)?;
    d.set_item("ks", g.ks)?;
    d.set_item("gini", g.gini)?;
    d.set_item("ki", g.ki)?;
    d.set_item("classification_rate", g.classification_rate)?;
    Ok(d)
}

/// Default rate among the top fraction `a` by score and its standard error.
#[pyfunction]
fn default_rate_among_accepted(scores: Vec<f64>, outcomes: Vec<u8>, a: f64) -> PyResult<(f64, f64)> {
    metrics::default_rate_among_accepted(&scores, &outcomes, a).py_err()
}

/// List of (acceptance_rate, default_rate, std_error, accepted) tuples.
#[pyfunction]
fn default_rate_curve(scores: Vec<f64>, outcomes: Vec<u8>, grid: Vec<f64>) -> PyResult<Vec<(f64, f64, f64, usize)>> {
    let curve = metrics::default_rate_curve(&scores, &outcomes, &grid).py_err()?;
    Ok(curve
        .into_iter()
        .map(|p| (p.acceptance_rate, p.default_rate, p.std_error, p.accepted))
        .collect())
}

#[pyclass(name = "ExperimentReport", module = "credit_ri", frozen)]
struct PyReport {
    inner: ExperimentReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn selected(&self) -> &'static str {
        self.inner.selected.tag()
    }

    #[getter]
    fn selection_value(&self) -> f64 {
        self.inner.selection_value
    }

    #[getter]
    fn techniques(&self) -> Vec<&'static str> {
        self.inner.results.iter().map(|r| r.fit.technique.tag()).collect()
    }

    #[getter]
    fn evaluation_restricted(&self) -> bool {
        self.inner.evaluation_restricted
    }

    #[getter]
    fn illegal_reads(&self) -> u64 {
        self.inner.audit.illegal_reads
    }

    /// A2 curve of a technique as (acceptance_rate, default_rate, std_error, accepted) tuples.
    fn a2_curve(&self, technique: &str) -> PyResult<Vec<(f64, f64, f64, usize)>> {
        let t: Technique = technique.parse().py_err()?;
        let r = self
            .inner
            .result(t)
            .ok_or_else(|| PyValueError::new_err(format!("technique `{technique}` was not run")))?;
        Ok(r.a2_curve
            .iter()
            .map(|p| (p.acceptance_rate, p.default_rate, p.std_error, p.accepted))
            .collect())
    }

    fn report_csv(&self) -> PyResult<String> {
        pipeline::report_csv(&self.inner).py_err()
    }

    fn curves_csv(&self) -> PyResult<String> {
        pipeline::curves_csv(&self.inner).py_err()
    }

    fn selection_text(&self) -> String {
        pipeline::selection_text(&self.inner)
    }

    /// Writes report.csv, curves.csv, selection.txt and model files; returns the paths.
    fn write(&self, dir: PathBuf) -> PyResult<Vec<PathBuf>> {
        pipeline::write_outputs(&self.inner, &dir).py_err()
    }
}

/// Runs the experiment described by a config file.
#[pyfunction]
#[pyo3(signature = (path, seed = None))]
fn run_config(py: Python<'_>, path: PathBuf, seed: Option<u64>) -> PyResult<PyReport> {
    let mut run = parse_config(&path).py_err()?;
    if let Some(seed) = seed {
        run.experiment.master_seed = seed;
    }
    let inner = py.detach(|| pipeline::run_experiment(&run.experiment)).py_err()?;
    Ok(PyReport { inner })
}

/// Runs the default comparison on a synthetic population.
#[pyfunction]
#[pyo3(signature = (n = 6000, k = 30, good_rate = 0.9, seed = 0, techniques = None))]
fn run_synthetic(
    py: Python<'_>,
    n: usize,
    k: usize,
    good_rate: f64,
    seed: u64,
    techniques: Option<Vec<String>>,
) -> PyResult<PyReport> {
    let mut cfg = ExperimentConfig::synthetic(n, k, good_rate, seed);
    if let Some(tags) = techniques {
        cfg.techniques = tags
            .iter()
            .map(|t| t.parse().map(TechniqueConfig::new))
            .collect::<credit_ri::Result<_>>()
            .py_err()?;
    }
    let inner = py.detach(|| pipeline::run_experiment(&cfg)).py_err()?;
    Ok(PyReport { inner })
}

#[pymodule]
#[pyo3(name = "credit_ri")]
fn credit_ri_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyScoreModel>()?;
    m.add_class::<PyTechniqueFit>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(fit_logistic, m)?)?;
    m.add_function(wrap_pyfunction!(fit_technique, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(ks_statistic, m)?)?;
    m.add_function(wrap_pyfunction!(global_indicators, m)?)?;
    m.add_function(wrap_pyfunction!(default_rate_among_accepted, m)?)?;
    m.add_function(wrap_pyfunction!(default_rate_curve, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_synthetic, m)?)?;
    Ok(())
}
