use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use edgecap::{
    Behavior, CapacityModel, Confusion, DemandVector, Error, Routing, Scheme, SimConfig, SimResult,
    TruncatedNormal, Window, WorkloadSpec,
};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::Solver(m) => PyRuntimeError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn demand(rates: Vec<f64>) -> PyResult<DemandVector> {
    DemandVector::new(rates).map_err(to_py)
}

#[pyclass(name = "StoragePlan", module = "pyedgecap", frozen)]
struct PyStoragePlan {
    inner: edgecap::StoragePlan,
}

#[pymethods]
impl PyStoragePlan {
    /// Build a plan of `k` objects on `n` nodes. `scheme` is "replication" or "xor".
    #[staticmethod]
    #[pyo3(signature = (n, k, overhead, scheme, seed, mu = 1.0))]
    fn build(n: usize, k: usize, overhead: f64, scheme: &str, seed: u64, mu: f64) -> PyResult<Self> {
        let scheme: Scheme = scheme.parse().map_err(to_py)?;
        let inner = edgecap::build_plan(n, k, mu, overhead, scheme, seed).map_err(to_py)?;
        Ok(PyStoragePlan { inner })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        let inner = edgecap::StoragePlan::from_text(text).map_err(to_py)?;
        Ok(PyStoragePlan { inner })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu()
    }

    #[getter]
    fn scheme(&self) -> &'static str {
        self.inner.scheme().as_str()
    }

    #[getter]
    fn overhead(&self) -> f64 {
        self.inner.overhead()
    }

    /// Items per node as strings such as "O0", "R3" or "P0+1".
    fn nodes(&self) -> Vec<Vec<String>> {
        self.inner
            .nodes()
            .map(|(_, items)| items.iter().map(ToString::to_string).collect())
            .collect()
    }

    /// Whether the demand (requests per second, one rate per object) is served.
    fn covers(&self, rates: Vec<f64>) -> PyResult<bool> {
        let model = CapacityModel::new(&self.inner).map_err(to_py)?;
        Ok(model.check_coverage(&demand(rates)?).map_err(to_py)?.covered)
    }

    /// Busiest node's load fraction under the best assignment; may exceed 1.
    fn min_max_load(&self, rates: Vec<f64>) -> PyResult<f64> {
        let model = CapacityModel::new(&self.inner).map_err(to_py)?;
        Ok(model.min_max_load(&demand(rates)?).map_err(to_py)?.0)
    }

    #[pyo3(signature = (rates, gray_width = 0.0))]
    fn verdict<'py>(&self, py: Python<'py>, rates: Vec<f64>, gray_width: f64) -> PyResult<Bound<'py, PyDict>> {
        let v = edgecap::verdict(&self.inner, &demand(rates)?, gray_width).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("covered", v.covered)?;
        d.set_item("service_cost", v.service_cost)?;
        d.set_item("max_load", v.max_load)?;
        d.set_item("gray", v.gray)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "StoragePlan(n={}, k={}, scheme={}, overhead={:.3}, mu={})",
            self.inner.n(),
            self.inner.k(),
            self.inner.scheme(),
            self.inner.overhead(),
            self.inner.mu()
        )
    }
}

#[pyclass(name = "Trace", module = "pyedgecap", frozen)]
struct PyTrace {
    inner: edgecap::Trace,
}

#[pymethods]
impl PyTrace {
    /// Synthetic trace against `plan`. Rates are multiples of the plan's mu.
    #[staticmethod]
    #[pyo3(signature = (plan, alpha, duration, seed, behavior = "baseline", rate_mean = 0.8, rate_std = 0.2))]
    fn generate(
        plan: &PyStoragePlan,
        alpha: f64,
        duration: f64,
        seed: u64,
        behavior: &str,
        rate_mean: f64,
        rate_std: f64,
    ) -> PyResult<Self> {
        let behavior: Behavior = behavior.parse().map_err(to_py)?;
        let mu = plan.inner.mu();
        let spec = WorkloadSpec {
            behavior,
            rate_mean: rate_mean * mu,
            rate_std: rate_std * mu,
            ..WorkloadSpec::for_plan(&plan.inner, alpha, duration, seed)
        };
        let inner = edgecap::generate_trace(&spec, &plan.inner).map_err(to_py)?;
        Ok(PyTrace { inner })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        let inner = edgecap::Trace::from_text(text).map_err(to_py)?;
        Ok(PyTrace { inner })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __len__(&self) -> usize {
        self.inner.requests.len()
    }

    /// (timestamp_us, user, object) for every request.
    fn requests(&self) -> Vec<(u64, u32, u32)> {
        self.inner
            .requests
            .iter()
            .map(|r| (r.timestamp_us, r.user.0, r.object.0))
            .collect()
    }

    /// Per-object request rates over the whole trace, or per window of `window` seconds.
    #[pyo3(signature = (window = None))]
    fn demand(&self, window: Option<f64>) -> PyResult<Vec<Vec<f64>>> {
        let window = window.map_or(Window::Whole, Window::Seconds);
        let d = edgecap::trace_to_demand(&self.inner, self.inner.k, window).map_err(to_py)?;
        Ok(d.into_iter().map(|d| d.rates().to_vec()).collect())
    }
}

fn result_dict<'py>(py: Python<'py>, r: &SimResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("completed", r.completed)?;
    d.set_item("dropped", r.dropped)?;
    d.set_item("drop_fraction", r.drop_fraction)?;
    d.set_item("latency_mean", r.latency_mean)?;
    d.set_item("latency_p50", r.latency_p50)?;
    d.set_item("latency_p99", r.latency_p99)?;
    d.set_item("local", r.local)?;
    d.set_item("remote", r.remote)?;
    d.set_item("collaborative", r.collaborative)?;
    let busy: Vec<f64> = r.nodes.iter().map(|n| n.busy_fraction).collect();
    d.set_item("busy_fraction", busy)?;
    Ok(d)
}

/// Run the simulator. Times in the result are seconds.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (plan, trace, seed, routing = "periodic", sync_interval = 0.1, queue_timeout = Some(0.1), rtt_limit = Some(0.2)))]
fn simulate<'py>(
    py: Python<'py>,
    plan: &PyStoragePlan,
    trace: &PyTrace,
    seed: u64,
    routing: &str,
    sync_interval: f64,
    queue_timeout: Option<f64>,
    rtt_limit: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let routing = match routing {
        "periodic" => Routing::Periodic { interval: sync_interval },
        "oracle" => Routing::Oracle,
        other => return Err(PyValueError::new_err(format!("unknown routing {other:?}"))),
    };
    let config = SimConfig {
        routing,
        queue_timeout,
        rtt_limit,
        ..SimConfig::new(seed)
    };
    let result = py
        .detach(|| edgecap::simulate(&trace.inner, &plan.inner, &config))
        .map_err(to_py)?;
    result_dict(py, &result)
}

/// Mean and sample standard deviation of the drop percentage.
#[pyfunction]
#[pyo3(signature = (lam, buffer, seed, total = 10_000, reps = 16))]
fn mm1_drop_experiment(py: Python<'_>, lam: f64, buffer: usize, seed: u64, total: usize, reps: usize) -> PyResult<(f64, f64)> {
    let s = py
        .detach(|| edgecap::mm1_drop_experiment(lam, buffer, total, reps, seed))
        .map_err(to_py)?;
    Ok((s.mean_pct, s.std_pct))
}

#[pyfunction]
fn sample_demands(
    k: usize,
    lambda_mean: f64,
    lambda_std: f64,
    alpha_mean: f64,
    alpha_std: f64,
    count: usize,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let lambda = TruncatedNormal {
        mean: lambda_mean,
        std: lambda_std,
    };
    let alpha = TruncatedNormal {
        mean: alpha_mean,
        std: alpha_std,
    };
    let d = edgecap::sample_demands(k, lambda, alpha, count, seed).map_err(to_py)?;
    Ok(d.into_iter().map(|d| d.rates().to_vec()).collect())
}

/// Matthews correlation of two label sequences; None when undefined.
#[pyfunction]
fn mcc(predicted: Vec<bool>, actual: Vec<bool>) -> PyResult<Option<f64>> {
    if predicted.len() != actual.len() {
        return Err(PyValueError::new_err("label sequences differ in length"));
    }
    Ok(Confusion::from_labels(predicted.into_iter().zip(actual)).mcc())
}

#[pyfunction]
fn zipf_popularity(k: usize, alpha: f64) -> PyResult<Vec<f64>> {
    edgecap::zipf_popularity(k, alpha).map_err(to_py)
}

#[pymodule]
pub fn pyedgecap(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyStoragePlan>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(mm1_drop_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(sample_demands, m)?)?;
    m.add_function(wrap_pyfunction!(mcc, m)?)?;
    m.add_function(wrap_pyfunction!(zipf_popularity, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
