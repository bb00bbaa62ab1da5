//! Python bindings. Matrices cross the boundary as lists of rows and
//! configurations as JSON strings, so the module needs nothing beyond the
//! standard library on the Python side (`numpy.asarray` works on the results).

use std::path::PathBuf;

use ndarray::Array2;
use neuromamba::analysis;
use neuromamba::baselines::{extract_features, FeatureMatrix, FeatureMethod};
use neuromamba::dataio::{self, Cohort, SyntheticSpec};
use neuromamba::model::{self, gradcheck_suite, GradcheckConfig, ModelConfig, NeuroMamba};
use neuromamba::regression::{self, GridSearch, KernelConfig};
use neuromamba::ssm::{self, ScanMode, SsmParams};
use neuromamba::training::{self, TrainConfig};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(neuromamba_py, NeuroMambaError, PyException);

fn err(e: neuromamba::Error) -> PyErr {
    NeuroMambaError::new_err(format!("{}: {e}", e.kind()))
}

fn json_err(e: serde_json::Error) -> PyErr {
    NeuroMambaError::new_err(format!("invalid JSON: {e}"))
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(NeuroMambaError::new_err("rows have different lengths"));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((flat.len().checked_div(width).unwrap_or(0), width), flat)
        .map_err(|e| NeuroMambaError::new_err(e.to_string()))
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// A loaded or generated cohort.
#[pyclass(name = "Cohort", module = "neuromamba_py", skip_from_py_object)]
#[derive(Clone)]
struct PyCohort {
    inner: Cohort,
}

#[pymethods]
impl PyCohort {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyCohort {
            inner: dataio::load_cohort(path).map_err(err)?,
        })
    }

    /// Generate from a synthetic spec given as JSON.
    #[staticmethod]
    fn synthetic(spec_json: &str) -> PyResult<Self> {
        let spec: SyntheticSpec = serde_json::from_str(spec_json).map_err(json_err)?;
        let (inner, _) = dataio::generate_synthetic(&spec).map_err(err)?;
        Ok(PyCohort { inner })
    }

    /// Copy with scores z-scored against the normative subjects.
    fn zscored(&self) -> PyResult<Self> {
        let z = dataio::zscore_scores(&self.inner.manifest).map_err(err)?;
        Ok(PyCohort {
            inner: self.inner.clone().with_manifest(z).map_err(err)?,
        })
    }

    fn save(&self, dir: PathBuf) -> PyResult<PathBuf> {
        dataio::save_cohort(&self.inner, &dir, "manifest.json").map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn n_regions(&self) -> usize {
        self.inner.n_regions()
    }

    #[getter]
    fn subject_ids(&self) -> Vec<String> {
        self.inner.subject_ids()
    }

    #[getter]
    fn score_names(&self) -> Vec<String> {
        self.inner.manifest.score_names.clone()
    }

    #[getter]
    fn diagnoses(&self) -> Vec<Option<&'static str>> {
        self.inner.diagnoses().into_iter().map(|d| d.map(|d| d.as_str())).collect()
    }

    fn scores(&self) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(&self.inner.score_matrix().map_err(err)?))
    }

    /// T x B values of subject `i`.
    fn timeseries(&self, i: usize) -> PyResult<Vec<Vec<f64>>> {
        let ts = self
            .inner
            .timeseries
            .get(i)
            .ok_or_else(|| NeuroMambaError::new_err(format!("no subject {i}")))?;
        Ok(rows(&ts.values))
    }
}

/// Baseline features as `(rows, feature_names)`. `method` is one of
/// fcm, iica, gica, alff.
#[pyfunction]
#[pyo3(signature = (cohort, method, components = 10, seed = 0, band = neuromamba::baselines::DEFAULT_BAND))]
fn features(
    py: Python<'_>,
    cohort: &PyCohort,
    method: &str,
    components: usize,
    seed: u64,
    band: (f64, f64),
) -> PyResult<(Vec<Vec<f64>>, Vec<String>)> {
    let method = match method {
        "fcm" => FeatureMethod::Fcm,
        "iica" => FeatureMethod::IndividualIca { n_components: components, seed },
        "gica" => FeatureMethod::GroupIca { n_components: components, seed },
        "alff" => FeatureMethod::Alff { f_lo: band.0, f_hi: band.1 },
        other => return Err(NeuroMambaError::new_err(format!("unknown feature method '{other}'"))),
    };
    let fm: FeatureMatrix = py.detach(|| extract_features(&cohort.inner, method)).map_err(err)?;
    Ok((rows(&fm.values), fm.feature_names))
}

/// Best `(gamma, ridge)` on a seeded 50/50 split.
#[pyfunction]
#[pyo3(signature = (features, targets, seed = 0))]
fn krr_grid_search(features: Vec<Vec<f64>>, targets: Vec<Vec<f64>>, seed: u64) -> PyResult<(f64, f64)> {
    let (x, y) = (matrix(features)?, matrix(targets)?);
    let best = regression::grid_search(x.view(), y.view(), &GridSearch::default(), seed).map_err(err)?.best;
    Ok((best.gamma, best.ridge))
}

/// Predictions for `query` from a kernel ridge model fit on the training rows.
#[pyfunction]
fn krr_predict(
    features: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    query: Vec<Vec<f64>>,
    gamma: f64,
    ridge: f64,
) -> PyResult<Vec<Vec<f64>>> {
    let (x, y, q) = (matrix(features)?, matrix(targets)?, matrix(query)?);
    let config = KernelConfig::new(gamma, ridge).map_err(err)?;
    let fit = regression::krr_fit(x.view(), y.view(), config).map_err(err)?;
    Ok(rows(&fit.predict(q.view()).map_err(err)?))
}

#[pyfunction]
fn krr_loocv(features: Vec<Vec<f64>>, targets: Vec<Vec<f64>>, gamma: f64, ridge: f64) -> PyResult<Vec<Vec<f64>>> {
    let (x, y) = (matrix(features)?, matrix(targets)?);
    let config = KernelConfig::new(gamma, ridge).map_err(err)?;
    Ok(rows(&regression::krr_loocv(x.view(), y.view(), config).map_err(err)?))
}

#[pyfunction]
fn pearson_r(truth: Vec<f64>, pred: Vec<f64>) -> PyResult<f64> {
    regression::pearson_r(truth.as_slice().into(), pred.as_slice().into()).map_err(err)
}

/// Mann-Whitney AUC of `scores` for the positive `labels`.
#[pyfunction]
fn roc_auc(labels: Vec<bool>, scores: Vec<f64>) -> PyResult<f64> {
    Ok(regression::roc_auc(&labels, &scores).map_err(err)?.auc)
}

/// `(abar, bbar)` of one diagonal state entry.
#[pyfunction]
fn zoh_discretize(a: f64, b: f64, delta: f64) -> PyResult<(f64, f64)> {
    ssm::zoh_discretize(a, b, delta).map_err(err)
}

/// Selective scan output `y` (T x E). `a` is E x L, `delta` T x E,
/// `b` and `c` T x L, `x` T x E.
#[pyfunction]
#[pyo3(signature = (a, delta, b, c, x, parallel = false))]
fn selective_scan(
    a: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    x: Vec<Vec<f64>>,
    parallel: bool,
) -> PyResult<Vec<Vec<f64>>> {
    let (a, delta, b, c, x) = (matrix(a)?, matrix(delta)?, matrix(b)?, matrix(c)?, matrix(x)?);
    let p = SsmParams { a_diag: a.view(), delta: delta.view(), b_in: b.view(), c_out: c.view() };
    let mode = if parallel { ScanMode::Parallel } else { ScanMode::Sequential };
    Ok(rows(&ssm::selective_scan(p, x.view(), mode, false).map_err(err)?.y))
}

fn train_config(json: Option<&str>) -> PyResult<TrainConfig> {
    let config: TrainConfig = match json {
        Some(text) => serde_json::from_str(text).map_err(json_err)?,
        None => TrainConfig::default(),
    };
    config.validate().map_err(err)?;
    Ok(config)
}

/// A NeuroMamba model in 32-bit precision.
#[pyclass(name = "Model", module = "neuromamba_py", skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: NeuroMamba<f32>,
}

#[pymethods]
impl PyModel {
    /// Fresh model; `config_json` overrides fields of the default config.
    #[new]
    #[pyo3(signature = (n_regions, seed = 0, config_json = None))]
    fn new(n_regions: usize, seed: u64, config_json: Option<&str>) -> PyResult<Self> {
        let mut value = serde_json::to_value(ModelConfig::new(n_regions)).expect("config serializes");
        if let Some(text) = config_json {
            let patch: serde_json::Value = serde_json::from_str(text).map_err(json_err)?;
            let (Some(base), Some(patch)) = (value.as_object_mut(), patch.as_object()) else {
                return Err(NeuroMambaError::new_err("model config must be a JSON object"));
            };
            base.extend(patch.clone());
        }
        let config: ModelConfig = serde_json::from_value(value).map_err(json_err)?;
        Ok(PyModel {
            inner: NeuroMamba::new(config, seed).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel {
            inner: model::load_checkpoint(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        model::save_checkpoint(&self.inner, &path).map_err(err)
    }

    #[getter]
    fn n_regions(&self) -> usize {
        self.inner.config.n_regions
    }

    #[getter]
    fn config_json(&self) -> String {
        serde_json::to_string(&self.inner.config).expect("config serializes")
    }

    /// Scores (or the BCE logit) for one T x B timeseries.
    #[pyo3(signature = (x, moca = None))]
    fn predict(&self, x: Vec<Vec<f64>>, moca: Option<f64>) -> PyResult<Vec<f64>> {
        let x = matrix(x)?.mapv(|v| v as f32);
        let y = self.inner.predict(x.view(), moca).map_err(err)?;
        Ok(y.iter().map(|&v| f64::from(v)).collect())
    }

    /// Pooled region vector of one timeseries.
    fn embed(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let x = matrix(x)?.mapv(|v| v as f32);
        let h = self.inner.embed(x.view()).map_err(err)?;
        Ok(h.iter().map(|&v| f64::from(v)).collect())
    }

    /// Train in place on every subject; returns the per-epoch loss.
    #[pyo3(signature = (cohort, train_json = None))]
    fn fit(&mut self, py: Python<'_>, cohort: &PyCohort, train_json: Option<&str>) -> PyResult<Vec<f64>> {
        let config = train_config(train_json)?;
        let head = self.inner.config.head;
        let model = self.inner.clone();
        let out = py
            .detach(|| {
                let examples = training::examples_from_cohort::<f32>(&cohort.inner, head)?;
                training::train(model, &examples, &config)
            })
            .map_err(err)?;
        self.inner = out.model;
        Ok(out.loss_curve)
    }

    /// Permutation feature importance report as JSON.
    #[pyo3(signature = (cohort, trials = 100, seed = 0))]
    fn pfi(&self, py: Python<'_>, cohort: &PyCohort, trials: usize, seed: u64) -> PyResult<String> {
        let report = py.detach(|| analysis::pfi(&self.inner, &cohort.inner, trials, seed)).map_err(err)?;
        Ok(report.to_json_string())
    }
}

/// Leave-one-out predictions (N x outputs) of freshly initialized models.
#[pyfunction]
#[pyo3(signature = (cohort, model_json = None, train_json = None))]
fn loocv(
    py: Python<'_>,
    cohort: &PyCohort,
    model_json: Option<&str>,
    train_json: Option<&str>,
) -> PyResult<Vec<Vec<f64>>> {
    let template = PyModel::new(cohort.inner.n_regions(), 0, model_json)?;
    let config = train_config(train_json)?;
    let out = py
        .detach(|| {
            let examples = training::examples_from_cohort::<f32>(&cohort.inner, template.inner.config.head)?;
            training::loocv(&examples, template.inner.config, &config)
        })
        .map_err(err)?;
    Ok(rows(&out.predictions))
}

/// Finite-difference check of a small 64-bit model; returns
/// `(passed, worst relative error)`.
#[pyfunction]
#[pyo3(signature = (n_regions = 4, n_timepoints = 16, seed = 0))]
fn gradcheck(py: Python<'_>, n_regions: usize, n_timepoints: usize, seed: u64) -> PyResult<(bool, f64)> {
    let config = ModelConfig {
        state_size: 4,
        ..ModelConfig::new(n_regions)
    };
    let reports = py
        .detach(|| gradcheck_suite(config, n_timepoints, seed, GradcheckConfig::default()))
        .map_err(err)?;
    let passed = reports.iter().all(|(_, r)| r.passed);
    let worst = reports.iter().map(|(_, r)| r.max_rel_error).fold(0.0, f64::max);
    Ok((passed, worst))
}

#[pymodule]
fn neuromamba_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NeuroMambaError", m.py().get_type::<NeuroMambaError>())?;
    m.add_class::<PyCohort>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(features, m)?)?;
    m.add_function(wrap_pyfunction!(krr_grid_search, m)?)?;
    m.add_function(wrap_pyfunction!(krr_predict, m)?)?;
    m.add_function(wrap_pyfunction!(krr_loocv, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_r, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(zoh_discretize, m)?)?;
    m.add_function(wrap_pyfunction!(selective_scan, m)?)?;
    m.add_function(wrap_pyfunction!(loocv, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    Ok(())
}
