//! Python bindings for `ultralola-core`.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ultralola_core::{accuracy, channel, gmm, mc, numerics, optimizer, simulator};

create_exception!(ultralola, InfeasibleDeadline, PyValueError);
create_exception!(ultralola, TargetUnreachable, PyValueError);

fn to_py_err(e: ultralola_core::Error) -> PyErr {
    match e {
        ultralola_core::Error::InfeasibleDeadline(_) => InfeasibleDeadline::new_err(e.to_string()),
        ultralola_core::Error::TargetUnreachable { .. } => TargetUnreachable::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_scenario(name: &str) -> PyResult<optimizer::Scenario> {
    match name {
        "ms" => Ok(optimizer::Scenario::MultiSnapshot),
        "mv" => Ok(optimizer::Scenario::MultiView),
        other => Err(PyValueError::new_err(format!("scenario must be 'ms' or 'mv', got '{other}'"))),
    }
}

#[pyclass(name = "LinkConfig", frozen, from_py_object)]
#[derive(Clone)]
struct PyLinkConfig(channel::LinkConfig);

#[pymethods]
impl PyLinkConfig {
    /// Link with linear receive SNR `snr`.
    #[new]
    fn new(
        snr: f64,
        activation_prob: f64,
        bandwidth_hz: f64,
        bits_per_feature: u32,
        feature_dim: u32,
    ) -> PyResult<Self> {
        channel::LinkConfig::new(snr, activation_prob, bandwidth_hz, bits_per_feature, feature_dim)
            .map(Self)
            .map_err(to_py_err)
    }

    #[staticmethod]
    fn from_snr_db(
        snr_db: f64,
        activation_prob: f64,
        bandwidth_hz: f64,
        bits_per_feature: u32,
        feature_dim: u32,
    ) -> PyResult<Self> {
        Self::new(channel::db_to_linear(snr_db), activation_prob, bandwidth_hz, bits_per_feature, feature_dim)
    }

    #[getter]
    fn snr(&self) -> f64 {
        self.0.snr
    }

    #[getter]
    fn activation_prob(&self) -> f64 {
        self.0.activation_prob
    }

    #[getter]
    fn bandwidth_hz(&self) -> f64 {
        self.0.bandwidth_hz
    }

    #[getter]
    fn payload_bits(&self) -> f64 {
        self.0.payload_bits()
    }

    fn capacity(&self) -> f64 {
        self.0.capacity()
    }

    fn dispersion(&self) -> f64 {
        self.0.dispersion()
    }

    fn decode_error_prob(&self, packet_len: u64) -> f64 {
        channel::decode_error_prob(&self.0, packet_len)
    }

    fn success_prob(&self, packet_len: u64) -> f64 {
        channel::success_prob(&self.0, packet_len)
    }

    fn __repr__(&self) -> String {
        format!(
            "LinkConfig(snr={}, activation_prob={}, bandwidth_hz={}, payload_bits={})",
            self.0.snr,
            self.0.activation_prob,
            self.0.bandwidth_hz,
            self.0.payload_bits()
        )
    }
}

#[pyclass(name = "ScenarioConfig", frozen, from_py_object)]
#[derive(Clone)]
struct PyScenarioConfig(accuracy::ScenarioConfig);

#[pymethods]
impl PyScenarioConfig {
    #[new]
    #[pyo3(signature = (deadline_s, sensing_time_s, link, num_classes, g_min, eta = accuracy::DEFAULT_ETA))]
    fn new(
        deadline_s: f64,
        sensing_time_s: f64,
        link: PyLinkConfig,
        num_classes: usize,
        g_min: f64,
        eta: f64,
    ) -> PyResult<Self> {
        accuracy::ScenarioConfig::new(deadline_s, sensing_time_s, link.0, num_classes, g_min, eta)
            .map(Self)
            .map_err(to_py_err)
    }

    #[getter]
    fn link(&self) -> PyLinkConfig {
        PyLinkConfig(self.0.link)
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.0.num_classes
    }

    #[getter]
    fn g_min(&self) -> f64 {
        self.0.g_min
    }

    fn k_ms(&self, packet_len: u64) -> u64 {
        accuracy::k_ms(&self.0, packet_len)
    }

    fn k_mv(&self, packet_len: u64) -> u64 {
        accuracy::k_mv(&self.0, packet_len)
    }

    fn d_max_ms(&self) -> PyResult<u64> {
        accuracy::d_max_ms(&self.0).map_err(to_py_err)
    }

    fn d_max_mv(&self) -> PyResult<u64> {
        accuracy::d_max_mv(&self.0).map_err(to_py_err)
    }

    fn e2e_ms_lower_bound(&self, packet_len: u64) -> f64 {
        accuracy::e2e_ms_lower_bound(&self.0, packet_len)
    }

    fn e2e_mv_exact_bound(&self, packet_len: u64) -> f64 {
        accuracy::e2e_mv_exact_bound(&self.0, packet_len)
    }

    fn e2e_mv_taylor(&self, packet_len: u64) -> f64 {
        accuracy::e2e_mv_taylor(&self.0, packet_len)
    }
}

#[pyclass(name = "GmmModel", frozen, from_py_object)]
#[derive(Clone)]
struct PyGmmModel(gmm::GmmModel);

#[pymethods]
impl PyGmmModel {
    #[new]
    fn new(centroids: Vec<Vec<f64>>, covariance_diag: Vec<f64>) -> PyResult<Self> {
        gmm::GmmModel::new(centroids, covariance_diag).map(Self).map_err(to_py_err)
    }

    /// Block-pattern centroids of +-1 with isotropic variance.
    #[staticmethod]
    fn synthetic(num_classes: usize, dim: usize, variance: f64) -> PyResult<Self> {
        gmm::GmmModel::synthetic(num_classes, dim, variance).map(Self).map_err(to_py_err)
    }

    /// Classes at equal pairwise gain `g_min`.
    #[staticmethod]
    fn equidistant(num_classes: usize, g_min: f64) -> PyResult<Self> {
        gmm::GmmModel::equidistant(num_classes, g_min).map(Self).map_err(to_py_err)
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.0.num_classes()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn min_discriminant_gain(&self) -> f64 {
        self.0.min_discriminant_gain()
    }

    fn classify(&self, fused: Vec<f64>) -> PyResult<usize> {
        if fused.len() != self.0.dim() {
            return Err(PyValueError::new_err(format!("expected {} features, got {}", self.0.dim(), fused.len())));
        }
        Ok(self.0.classify(&fused).index())
    }

    fn sample_features(&self, label: usize, count: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        if label >= self.0.num_classes() {
            return Err(PyValueError::new_err(format!("label {label} out of range")));
        }
        Ok(self.0.sample_features(gmm::ClassLabel(label), count, seed))
    }
}

#[pyclass(name = "PacketPlan", frozen, get_all)]
struct PyPacketPlan {
    packet_len: u64,
    num_views: u64,
    decode_error: f64,
    success_prob: f64,
    predicted_accuracy: f64,
    method: &'static str,
    surrogate_value: f64,
    continuous_optimum: Option<f64>,
}

impl From<optimizer::PacketPlan> for PyPacketPlan {
    fn from(p: optimizer::PacketPlan) -> Self {
        Self {
            packet_len: p.packet_len,
            num_views: p.num_views,
            decode_error: p.decode_error,
            success_prob: p.success_prob,
            predicted_accuracy: p.predicted_accuracy,
            method: p.method.as_str(),
            surrogate_value: p.surrogate_value,
            continuous_optimum: p.continuous_optimum,
        }
    }
}

#[pymethods]
impl PyPacketPlan {
    fn __repr__(&self) -> String {
        format!(
            "PacketPlan(method={}, packet_len={}, num_views={}, predicted_accuracy={:.6})",
            self.method, self.packet_len, self.num_views, self.predicted_accuracy
        )
    }
}

#[pyclass(name = "SimResult", frozen, get_all)]
struct PySimResult {
    trials: u64,
    successes: u64,
    accuracy: f64,
    ci_halfwidth_95: f64,
    seed: u64,
}

impl From<mc::SimResult> for PySimResult {
    fn from(r: mc::SimResult) -> Self {
        Self {
            trials: r.trials,
            successes: r.successes,
            accuracy: r.accuracy,
            ci_halfwidth_95: r.ci_halfwidth_95,
            seed: r.seed,
        }
    }
}

#[pymethods]
impl PySimResult {
    fn __repr__(&self) -> String {
        format!(
            "SimResult(accuracy={:.6}, ci_halfwidth_95={:.6}, trials={}, seed={})",
            self.accuracy, self.ci_halfwidth_95, self.trials, self.seed
        )
    }
}

#[pyfunction]
fn q_function(x: f64) -> f64 {
    numerics::q_function(x)
}

#[pyfunction]
fn db_to_linear(db: f64) -> f64 {
    channel::db_to_linear(db)
}

#[pyfunction]
fn accuracy_lower_bound(num_classes: usize, g_min: f64, k: u64) -> f64 {
    gmm::accuracy_lower_bound(num_classes, g_min, k)
}

#[pyfunction]
fn binary_accuracy_exact(g: f64, k: u64) -> f64 {
    gmm::binary_accuracy_exact(g, k)
}

#[pyfunction]
fn expected_accuracy_mv(num_classes: usize, g_min: f64, views: u64, rho: f64) -> f64 {
    accuracy::expected_accuracy_mv(num_classes, g_min, views, rho)
}

/// Packet length chosen by `method` (ultralola, urllc, shannon, brute).
#[pyfunction]
#[pyo3(signature = (cfg, scenario = "ms", method = "ultralola", target_eps = optimizer::URLLC_TARGET))]
fn optimize(cfg: &PyScenarioConfig, scenario: &str, method: &str, target_eps: f64) -> PyResult<PyPacketPlan> {
    let scenario = parse_scenario(scenario)?;
    let plan = match method {
        "ultralola" => optimizer::optimize(&cfg.0, scenario),
        "urllc" => optimizer::urllc_baseline(&cfg.0, scenario, target_eps),
        "shannon" => optimizer::shannon_baseline(&cfg.0, scenario),
        "brute" => optimizer::brute_force(&cfg.0, scenario),
        other => return Err(PyValueError::new_err(format!("unknown method '{other}'"))),
    };
    plan.map(PyPacketPlan::from).map_err(to_py_err)
}

/// Best entry of a `{packet_len: accuracy}` table for the given link.
#[pyfunction]
fn lookup_table_optimize(
    entries: BTreeMap<u64, f64>,
    num_classes: usize,
    link: &PyLinkConfig,
) -> PyResult<PyPacketPlan> {
    let table = optimizer::AccuracyTable::new(num_classes, entries).map_err(to_py_err)?;
    Ok(optimizer::lookup_table_optimize(&table, &link.0).into())
}

#[pyfunction]
#[pyo3(signature = (model, cfg, scenario, packet_len, trials, seed, workers = None))]
fn simulate(
    py: Python<'_>,
    model: &PyGmmModel,
    cfg: &PyScenarioConfig,
    scenario: &str,
    packet_len: u64,
    trials: u64,
    seed: u64,
    workers: Option<usize>,
) -> PyResult<PySimResult> {
    let scenario = parse_scenario(scenario)?;
    if trials == 0 || packet_len == 0 {
        return Err(PyValueError::new_err("packet_len and trials must be positive"));
    }
    if model.0.num_classes() != cfg.0.num_classes {
        return Err(PyValueError::new_err("model and scenario disagree on the number of classes"));
    }
    let workers = workers.unwrap_or_else(mc::default_workers);
    let (m, c) = (&model.0, &cfg.0);
    let result = py.detach(|| simulator::simulate(m, c, scenario, packet_len, trials, seed, workers));
    Ok(result.into())
}

#[pymodule]
pub fn ultralola(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLinkConfig>()?;
    m.add_class::<PyScenarioConfig>()?;
    m.add_class::<PyGmmModel>()?;
    m.add_class::<PyPacketPlan>()?;
    m.add_class::<PySimResult>()?;
    m.add_function(wrap_pyfunction!(q_function, m)?)?;
    m.add_function(wrap_pyfunction!(db_to_linear, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(binary_accuracy_exact, m)?)?;
    m.add_function(wrap_pyfunction!(expected_accuracy_mv, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(lookup_table_optimize, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add("InfeasibleDeadline", m.py().get_type::<InfeasibleDeadline>())?;
    m.add("TargetUnreachable", m.py().get_type::<TargetUnreachable>())?;
    Ok(())
}
