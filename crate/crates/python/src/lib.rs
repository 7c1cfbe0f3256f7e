//! Python bindings for `aggtail`.
//!
//! Structured results (tail forms, fits, verdicts, study reports) are
//! returned as plain dicts built from their JSON serialisation.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use aggtail::copulas::CopulaSpec;
use aggtail::montecarlo::{self, Tolerance, Weights};
use aggtail::pipeline::{self, Schema, StudyConfig, SynthConfig};
use aggtail::tailpredict::{self, Condition, LtDescriptor, MarginPair};
use aggtail::{dependence, fitting, gpd, rng};

fn err(e: aggtail::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn weights(w: Option<(f64, f64)>) -> PyResult<Option<Weights>> {
    w.map(|(a, b)| Weights::new(a, b)).transpose().map_err(err)
}

fn margins(sigma1: f64, xi1: f64, sigma2: f64, xi2: f64) -> PyResult<MarginPair> {
    MarginPair::from_params(sigma1, xi1, sigma2, xi2).map_err(err)
}

/// Generalized Pareto distribution `GPD(σ, ξ)`.
#[pyclass(name = "GpdParams", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyGpd(gpd::GpdParams);

#[pymethods]
impl PyGpd {
    #[new]
    fn new(sigma: f64, xi: f64) -> PyResult<Self> {
        gpd::GpdParams::new(sigma, xi).map(Self).map_err(err)
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma()
    }

    #[getter]
    fn xi(&self) -> f64 {
        self.0.xi()
    }

    fn upper_endpoint(&self) -> f64 {
        self.0.upper_endpoint()
    }

    fn cdf(&self, x: f64) -> f64 {
        self.0.cdf(x)
    }

    fn sf(&self, x: f64) -> f64 {
        self.0.sf(x)
    }

    fn quantile(&self, q: f64) -> PyResult<f64> {
        self.0.quantile(q).map_err(err)
    }

    #[pyo3(signature = (n, seed=1))]
    fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        self.0.sample(n, &mut rng::seeded(seed))
    }

    /// Law of the excess over `u`.
    fn threshold_stability(&self, u: f64) -> PyResult<Self> {
        self.0.threshold_stability(u).map(Self).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("GpdParams(sigma={}, xi={})", self.0.sigma(), self.0.xi())
    }
}

/// Dependence family, built from strings such as `"logistic:0.5"`,
/// `"invlogistic:0.3"`, `"gaussian:0.5"`, `"indep"`, `"perfect+"`.
#[pyclass(name = "Copula", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyCopula(CopulaSpec);

#[pymethods]
impl PyCopula {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        spec.parse().map(Self).map_err(err)
    }

    /// `{chi, chi_bar, eta}`.
    fn theoretical_dependence<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.theoretical_dependence())
    }

    /// Uniform pairs.
    #[pyo3(signature = (n, seed=1))]
    fn sample(&self, n: usize, seed: u64) -> Vec<(f64, f64)> {
        self.0.sample(n, &mut rng::seeded(seed))
    }

    fn __repr__(&self) -> String {
        format!("Copula('{}')", self.0)
    }
}

fn copula(spec: &str) -> PyResult<CopulaSpec> {
    spec.parse().map_err(err)
}

/// Tail form of `X₁ + X₂` from the copula-specific formulas.
#[pyfunction]
#[pyo3(signature = (copula_spec, sigma1=1.0, xi1=0.0, sigma2=1.0, xi2=0.0))]
fn predict_copula<'py>(
    py: Python<'py>,
    copula_spec: &str,
    sigma1: f64,
    xi1: f64,
    sigma2: f64,
    xi2: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let form = tailpredict::predict_copula(&margins(sigma1, xi1, sigma2, xi2)?, &copula(copula_spec)?).map_err(err)?;
    to_py(py, &form)
}

/// Tail form of `X₁ + X₂` from the limit-model theorems.
#[pyfunction]
#[pyo3(signature = (condition, eta=None, kappa=None, sigma1=1.0, xi1=0.0, sigma2=1.0, xi2=0.0))]
#[allow(clippy::too_many_arguments)]
fn predict_theorem<'py>(
    py: Python<'py>,
    condition: &str,
    eta: Option<f64>,
    kappa: Option<f64>,
    sigma1: f64,
    xi1: f64,
    sigma2: f64,
    xi2: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let cond: Condition = condition.parse().map_err(err)?;
    let dep = LtDescriptor::new(eta, kappa, cond).map_err(err)?;
    let form = tailpredict::predict_theorem(&margins(sigma1, xi1, sigma2, xi2)?, &dep).map_err(err)?;
    to_py(py, &form)
}

fn pairs(x1: Vec<f64>, x2: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
    if x1.len() != x2.len() {
        return Err(PyValueError::new_err("x1 and x2 must have the same length"));
    }
    Ok(x1.into_iter().zip(x2).collect())
}

#[pyfunction]
#[pyo3(signature = (x1, x2, q=0.95))]
fn chi_empirical<'py>(py: Python<'py>, x1: Vec<f64>, x2: Vec<f64>, q: f64) -> PyResult<Bound<'py, PyAny>> {
    let est = dependence::chi_empirical(&pairs(x1, x2)?, q).map_err(err)?;
    to_py(py, &est)
}

#[pyfunction]
#[pyo3(signature = (x1, x2, q=0.95))]
fn eta_estimate<'py>(py: Python<'py>, x1: Vec<f64>, x2: Vec<f64>, q: f64) -> PyResult<Bound<'py, PyAny>> {
    let est = dependence::eta_estimate(&pairs(x1, x2)?, q).map_err(err)?;
    to_py(py, &est)
}

/// Maximum-likelihood GPD fit to the excesses over the `p` quantile.
#[pyfunction]
#[pyo3(signature = (data, p=0.95))]
fn fit_gpd<'py>(py: Python<'py>, data: Vec<f64>, p: f64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &fitting::fit_gpd(&data, p).map_err(err)?)
}

/// `n` draws of the (optionally weighted) aggregate `R`.
#[pyfunction]
#[pyo3(signature = (copula_spec, n, seed=1, sigma1=1.0, xi1=0.0, sigma2=1.0, xi2=0.0, weights=None))]
#[allow(clippy::too_many_arguments)]
fn simulate_aggregate(
    py: Python<'_>,
    copula_spec: &str,
    n: usize,
    seed: u64,
    sigma1: f64,
    xi1: f64,
    sigma2: f64,
    xi2: f64,
    weights: Option<(f64, f64)>,
) -> PyResult<Vec<f64>> {
    let m = margins(sigma1, xi1, sigma2, xi2)?;
    let spec = copula(copula_spec)?;
    let w = self::weights(weights)?;
    py.detach(|| montecarlo::simulate_aggregate(&m, &spec, w, n, seed))
        .map(|s| s.values)
        .map_err(err)
}

/// Predict, simulate and compare the slope-implied tail parameter.
#[pyfunction]
#[pyo3(signature = (
    copula_spec, sigma1=1.0, xi1=0.0, sigma2=1.0, xi2=0.0, weights=None,
    n=1_000_000, seed=1, p_lo=0.99, p_hi=0.999, p_count=40, tolerance=0.10, linear_tolerance=0.15,
))]
#[allow(clippy::too_many_arguments)]
fn verify_prediction<'py>(
    py: Python<'py>,
    copula_spec: &str,
    sigma1: f64,
    xi1: f64,
    sigma2: f64,
    xi2: f64,
    weights: Option<(f64, f64)>,
    n: usize,
    seed: u64,
    p_lo: f64,
    p_hi: f64,
    p_count: usize,
    tolerance: f64,
    linear_tolerance: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let m = margins(sigma1, xi1, sigma2, xi2)?;
    let spec = copula(copula_spec)?;
    let w = self::weights(weights)?;
    let grid = montecarlo::p_grid(p_lo, p_hi, p_count).map_err(err)?;
    let tol = Tolerance {
        relative: tolerance,
        linear_in_r: linear_tolerance,
    };
    let verdict = py
        .detach(|| montecarlo::verify_prediction(&m, &spec, w, n, &grid, tol, seed))
        .map_err(err)?;
    to_py(py, &verdict)
}

/// Gridded time series, one column per site.
#[pyclass(name = "GridDataset", frozen)]
struct PyGrid(pipeline::GridDataset);

#[pymethods]
impl PyGrid {
    /// Load a long-format CSV (`time,site,value[,x,y]`).
    #[staticmethod]
    #[pyo3(signature = (path, months=None))]
    fn from_csv(path: &str, months: Option<Vec<u32>>) -> PyResult<Self> {
        let schema = Schema {
            months,
            ..Schema::default()
        };
        pipeline::ingest_csv(path, &schema).map(Self).map_err(err)
    }

    /// Synthetic 2×2 grid: `"heavy"` (hourly, GPD(1, 0.2), logistic 0.3) or
    /// `"bounded"` (daily, GPD(1, -0.2), inverted logistic 0.5).
    #[staticmethod]
    #[pyo3(signature = (kind, n_times, seed=1))]
    fn synthetic(kind: &str, n_times: usize, seed: u64) -> PyResult<Self> {
        let cfg = match kind {
            "heavy" => SynthConfig::heavy_hourly(n_times, seed),
            "bounded" => SynthConfig::bounded_daily(n_times, seed),
            other => return Err(PyValueError::new_err(format!("unknown kind '{other}'"))),
        };
        pipeline::synthetic_grid(&cfg).map(Self).map_err(err)
    }

    #[getter]
    fn n_times(&self) -> usize {
        self.0.n_times()
    }

    #[getter]
    fn sites(&self) -> Vec<String> {
        self.0.sites.iter().map(|s| s.id.clone()).collect()
    }

    #[getter]
    fn gaps_dropped(&self) -> usize {
        self.0.gaps_dropped
    }

    fn series(&self, site: &str) -> PyResult<Vec<f64>> {
        let i = self
            .0
            .site_index(site)
            .ok_or_else(|| PyValueError::new_err(format!("unknown site '{site}'")))?;
        Ok(self.0.series[i].clone())
    }

    /// Marginal, pooled and aggregate GPD fits with bootstrap intervals.
    #[pyo3(signature = (p=0.98, n_boot=1000, mean_block=7.0, level=0.95, eta_q=0.95, seed=1))]
    #[allow(clippy::too_many_arguments)]
    fn run_study<'py>(
        &self,
        py: Python<'py>,
        p: f64,
        n_boot: usize,
        mean_block: f64,
        level: f64,
        eta_q: f64,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let cfg = StudyConfig {
            p,
            n_boot,
            mean_block,
            level,
            eta_q,
            seed,
            ..StudyConfig::default()
        };
        let report = py.detach(|| pipeline::run_study(&self.0, &cfg)).map_err(err)?;
        to_py(py, &report)
    }

    fn __repr__(&self) -> String {
        format!("GridDataset(sites={}, n_times={})", self.0.n_sites(), self.0.n_times())
    }
}

#[pymodule]
fn aggtail_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGpd>()?;
    m.add_class::<PyCopula>()?;
    m.add_class::<PyGrid>()?;
    m.add_function(wrap_pyfunction!(predict_copula, m)?)?;
    m.add_function(wrap_pyfunction!(predict_theorem, m)?)?;
    m.add_function(wrap_pyfunction!(chi_empirical, m)?)?;
    m.add_function(wrap_pyfunction!(eta_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(fit_gpd, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(verify_prediction, m)?)?;
    Ok(())
}
