//! Python bindings: degree models, mask ensembles, the analytic solvers,
//! Monte Carlo runs and preset sweeps.

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use maskepi_core::config::{self, ExperimentConfig};
use maskepi_core::experiment::run_experiment;
use maskepi_core::sim::Estimate;
use maskepi_core::{analytic, spectral, EmergenceThreshold, Error, MonteCarloConfig, Positivity, SeedPolicy, SolverOptions};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        Error::NonConvergence { .. } | Error::SeedExhausted { .. } | Error::TypeMismatch { .. } | Error::OracleTooLarge { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn positivity(permissive: bool) -> Positivity {
    if permissive {
        Positivity::Permissive
    } else {
        Positivity::Strict
    }
}

#[pyclass(name = "DegreeModel", module = "maskepi", frozen)]
struct PyDegreeModel {
    inner: maskepi_core::DegreeModel,
}

#[pymethods]
impl PyDegreeModel {
    #[staticmethod]
    fn poisson(mean: f64) -> PyResult<Self> {
        Ok(Self { inner: maskepi_core::DegreeModel::poisson(mean).map_err(to_py)? })
    }

    #[staticmethod]
    fn empirical(degrees: Vec<u32>, probabilities: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: maskepi_core::DegreeModel::empirical(&degrees, &probabilities).map_err(to_py)? })
    }

    /// g(x) = sum_k p_k x^k
    fn pgf(&self, x: f64) -> PyResult<f64> {
        self.inner.pgf(x).map_err(to_py)
    }

    /// Excess-degree PGF G(x).
    fn excess_pgf(&self, x: f64) -> PyResult<f64> {
        self.inner.excess_pgf(x).map_err(to_py)
    }

    /// (<k>, <k^2>)
    fn moments(&self) -> (f64, f64) {
        self.inner.moments()
    }

    #[getter]
    fn mean_degree(&self) -> f64 {
        self.inner.mean_degree()
    }

    fn excess_factor(&self) -> PyResult<f64> {
        self.inner.excess_factor().map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyclass(name = "MaskEnsemble", module = "maskepi", frozen)]
struct PyMaskEnsemble {
    inner: maskepi_core::MaskEnsemble,
}

#[pymethods]
impl PyMaskEnsemble {
    #[staticmethod]
    #[pyo3(signature = (eps_in, eps_out, baseline_t, m, labels=None, permissive=false))]
    fn from_efficiencies(
        eps_in: Vec<f64>,
        eps_out: Vec<f64>,
        baseline_t: f64,
        m: Vec<f64>,
        labels: Option<Vec<String>>,
        permissive: bool,
    ) -> PyResult<Self> {
        let inner = maskepi_core::MaskEnsemble::from_efficiencies_with(&eps_in, &eps_out, baseline_t, &m, labels, positivity(permissive))
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (t, m, labels=None, permissive=false))]
    fn from_matrix(t: Vec<Vec<f64>>, m: Vec<f64>, labels: Option<Vec<String>>, permissive: bool) -> PyResult<Self> {
        let inner = maskepi_core::MaskEnsemble::from_matrix_with(&t, &m, labels, positivity(permissive)).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn num_types(&self) -> usize {
        self.inner.num_types()
    }

    #[getter]
    fn prevalence(&self) -> Vec<f64> {
        self.inner.prevalence().to_vec()
    }

    #[getter]
    fn t_matrix(&self) -> Vec<Vec<f64>> {
        self.inner.t_matrix()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels().to_vec()
    }

    fn is_rank_one(&self) -> bool {
        self.inner.is_rank_one()
    }

    fn __repr__(&self) -> String {
        format!("MaskEnsemble(labels={:?}, m={:?}, T={:?})", self.inner.labels(), self.inner.prevalence(), self.inner.t_matrix())
    }
}

#[pyclass(name = "AnalyticSummary", module = "maskepi", frozen, get_all)]
struct PyAnalyticSummary {
    r0: f64,
    pe_by_seed_type: Vec<f64>,
    pe_random_seed: f64,
    extinction_probs: Vec<f64>,
    q1: Vec<f64>,
    q0: Vec<f64>,
    individual_infection_prob: Vec<f64>,
    epidemic_size_by_type: Vec<f64>,
    total_epidemic_size: f64,
    supercritical: bool,
    extinction_iterations: usize,
    size_iterations: usize,
}

#[pymethods]
impl PyAnalyticSummary {
    fn __repr__(&self) -> String {
        format!(
            "AnalyticSummary(r0={:.6}, pe_random_seed={:.6}, total_epidemic_size={:.6})",
            self.r0, self.pe_random_seed, self.total_epidemic_size
        )
    }
}

impl From<analytic::AnalyticSummary> for PyAnalyticSummary {
    fn from(s: analytic::AnalyticSummary) -> Self {
        PyAnalyticSummary {
            supercritical: s.is_supercritical(),
            r0: s.r0,
            pe_by_seed_type: s.pe_by_seed_type,
            pe_random_seed: s.pe_random_seed,
            extinction_probs: s.extinction_probs,
            q1: s.q1,
            q0: s.q0,
            individual_infection_prob: s.individual_infection_prob,
            epidemic_size_by_type: s.epidemic_size_by_type,
            total_epidemic_size: s.total_epidemic_size,
            extinction_iterations: s.diagnostics.extinction_iterations,
            size_iterations: s.diagnostics.size_iterations,
        }
    }
}

type Pair = (f64, f64);

fn pair(e: Estimate) -> Pair {
    (e.mean, e.se)
}

/// Monte Carlo estimates as `(mean, standard error)` pairs; `None` where
/// nothing could be estimated (no trial emerged, or no seed of that type).
#[pyclass(name = "TrialAggregate", module = "maskepi", frozen, get_all)]
struct PyTrialAggregate {
    trials: usize,
    n_emerged: usize,
    seed_redraws: usize,
    trials_by_seed_type: Vec<usize>,
    emerged_by_seed_type: Vec<usize>,
    empirical_pe_random: Pair,
    empirical_pe_by_seed_type: Vec<Option<Pair>>,
    mean_es_by_type_given_emergence: Option<Vec<Pair>>,
    mean_total_es_given_emergence: Option<Pair>,
    individual_infection_prob: Option<Vec<Pair>>,
}

#[pymethods]
impl PyTrialAggregate {
    fn __repr__(&self) -> String {
        format!("TrialAggregate(trials={}, n_emerged={}, pe_random={:?})", self.trials, self.n_emerged, self.empirical_pe_random)
    }
}

impl From<maskepi_core::TrialAggregate> for PyTrialAggregate {
    fn from(a: maskepi_core::TrialAggregate) -> Self {
        PyTrialAggregate {
            trials: a.trials,
            n_emerged: a.n_emerged,
            seed_redraws: a.seed_redraws,
            trials_by_seed_type: a.trials_by_seed_type.clone(),
            emerged_by_seed_type: a.emerged_by_seed_type.clone(),
            empirical_pe_random: pair(a.empirical_pe_random),
            empirical_pe_by_seed_type: a.empirical_pe_by_seed_type.iter().map(|e| e.map(pair)).collect(),
            mean_es_by_type_given_emergence: a.mean_es_by_type_given_emergence.as_ref().map(|v| v.iter().copied().map(pair).collect()),
            mean_total_es_given_emergence: a.mean_total_es_given_emergence.map(pair),
            individual_infection_prob: a.individual_infection_prob.as_ref().map(|v| v.iter().copied().map(pair).collect()),
        }
    }
}

/// Analytic PE, R0 and epidemic sizes.
#[pyfunction]
#[pyo3(signature = (ensemble, model, tol=1e-10, max_iter=1_000_000, theta=None))]
fn summarize(
    py: Python<'_>,
    ensemble: &PyMaskEnsemble,
    model: &PyDegreeModel,
    tol: f64,
    max_iter: usize,
    theta: Option<Vec<f64>>,
) -> PyResult<PyAnalyticSummary> {
    let opts = SolverOptions { tol, max_iter, theta, ..Default::default() };
    let s = py.detach(|| maskepi_core::summarize(&ensemble.inner, &model.inner, &opts)).map_err(to_py)?;
    Ok(s.into())
}

#[pyfunction]
fn reproduction_number(ensemble: &PyMaskEnsemble, model: &PyDegreeModel) -> PyResult<f64> {
    analytic::reproduction_number(&ensemble.inner, &model.inner).map_err(to_py)
}

/// Spectral radius of a square non-negative matrix given by rows.
#[pyfunction]
fn spectral_radius(matrix: Vec<Vec<f64>>) -> PyResult<f64> {
    let n = matrix.len();
    if matrix.iter().any(|row| row.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    let flat: Vec<f64> = matrix.concat();
    spectral::spectral_radius(&flat, n, spectral::DEFAULT_TOL, spectral::DEFAULT_MAX_ITER).map_err(to_py)
}

/// Monte Carlo outbreaks on configuration-model networks. `seed_type` is a
/// 0-based type index; `None` seeds a uniformly random node.
#[pyfunction]
#[pyo3(signature = (model, ensemble, n_nodes=100_000, trials=1_000, seed_type=None, threshold=0.05, master_seed=1, regenerate_network=true, threads=None))]
#[allow(clippy::too_many_arguments)]
fn monte_carlo(
    py: Python<'_>,
    model: &PyDegreeModel,
    ensemble: &PyMaskEnsemble,
    n_nodes: usize,
    trials: usize,
    seed_type: Option<usize>,
    threshold: f64,
    master_seed: u64,
    regenerate_network: bool,
    threads: Option<usize>,
) -> PyResult<PyTrialAggregate> {
    let config = MonteCarloConfig {
        n_nodes,
        trials,
        seed_policy: seed_type.map_or(SeedPolicy::UniformNode, SeedPolicy::FixedType),
        threshold: EmergenceThreshold::Fraction(threshold),
        master_seed,
        regenerate_network,
    };
    let pool = rayon_pool(threads)?;
    let agg = py.detach(|| pool.install(|| maskepi_core::monte_carlo(&model.inner, &ensemble.inner, &config))).map_err(to_py)?;
    Ok(agg.into())
}

fn rayon_pool(threads: Option<usize>) -> PyResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pyfunction]
fn list_presets() -> Vec<String> {
    config::list_presets()
}

/// A preset as config-file text.
#[pyfunction]
fn preset_config(name: &str) -> PyResult<String> {
    config::preset(name).map(|c| c.to_toml()).ok_or_else(|| PyValueError::new_err(format!("unknown preset {name:?}")))
}

/// Runs a sweep from config-file text and returns the CSV.
#[pyfunction]
#[pyo3(signature = (config_text, threads=None))]
fn run_config(py: Python<'_>, config_text: &str, threads: Option<usize>) -> PyResult<String> {
    let cfg = ExperimentConfig::from_toml(config_text).map_err(to_py)?;
    let pool = rayon_pool(threads)?;
    let mut buf = Vec::new();
    py.detach(|| pool.install(|| run_experiment(&cfg, &mut buf))).map_err(to_py)?;
    String::from_utf8(buf).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn maskepi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDegreeModel>()?;
    m.add_class::<PyMaskEnsemble>()?;
    m.add_class::<PyAnalyticSummary>()?;
    m.add_class::<PyTrialAggregate>()?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    m.add_function(wrap_pyfunction!(reproduction_number, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_radius, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(list_presets, m)?)?;
    m.add_function(wrap_pyfunction!(preset_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
