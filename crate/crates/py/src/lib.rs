//! Python bindings for `uldp-core`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use uldp_core::{
    ldp_optimum as core_ldp_optimum, p_alpha, run_trials, sweep as core_sweep, ubd_mechanism,
    ubd_streaming, validate_uldp, EstimatorTable, Mechanism, Mixture, Partition, Problem,
    SaddleSolution, SimConfig, UldpError, UldpReport,
};

fn err(e: UldpError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Saddle point of the tradeoff.
#[pyclass(frozen, get_all, module = "uldp_lab")]
struct Solution {
    alpha_star: f64,
    t_star: Vec<f64>,
    value: f64,
    method: String,
    certificate: f64,
}

impl From<SaddleSolution> for Solution {
    fn from(s: SaddleSolution) -> Self {
        Solution {
            alpha_star: s.alpha_star,
            t_star: s.t_star,
            value: s.value,
            method: s.method.to_string(),
            certificate: s.certificate,
        }
    }
}

#[pymethods]
impl Solution {
    fn __repr__(&self) -> String {
        format!(
            "Solution(alpha_star={}, t_star={:?}, value={}, method='{}')",
            self.alpha_star, self.t_star, self.value, self.method
        )
    }
}

/// Optimal `(α*, t*)` for `w` symbols of which `v` are sensitive.
#[pyfunction]
#[pyo3(signature = (w, v, eps, numerical = false))]
fn solve(w: usize, v: usize, eps: f64, numerical: bool) -> PyResult<Solution> {
    let p = Problem::new(w, v, eps).map_err(err)?;
    let s = if numerical { p.saddle_solve() } else { p.solve() };
    s.map(Solution::from).map_err(err)
}

/// Asymptotic worst-case error `M(α, t)` of the uBD scheme.
#[pyfunction]
fn objective(w: usize, v: usize, eps: f64, alpha: f64, t: Vec<f64>) -> PyResult<f64> {
    let p = Problem::new(w, v, eps).map_err(err)?;
    Ok(p.objective(alpha, &t).map_err(err)?.total)
}

/// Optimal LDP error on `v` symbols and the optimal block sizes.
#[pyfunction]
fn ldp_optimum(v: usize, eps: f64) -> PyResult<(f64, Vec<usize>)> {
    let o = core_ldp_optimum(v, eps).map_err(err)?;
    Ok((o.value, o.k_star))
}

/// Solves across a log-spaced budget range; one dict per budget.
#[pyfunction]
#[pyo3(signature = (w, v, eps_min = 0.1, eps_max = 10.0, points = 30, workers = None))]
fn sweep<'py>(
    py: Python<'py>,
    w: usize,
    v: usize,
    eps_min: f64,
    eps_max: f64,
    points: usize,
    workers: Option<usize>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let workers = workers.unwrap_or_else(default_workers);
    let rows = py
        .detach(|| core_sweep(w, v, eps_min, eps_max, points, workers))
        .map_err(err)?;
    rows.into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("epsilon", r.epsilon)?;
            d.set_item("alpha_star", r.alpha_star)?;
            d.set_item("t_star", r.t_star)?;
            d.set_item("m_star", r.m_star)?;
            d.set_item("r_ubd", r.r_ubd)?;
            d.set_item("r_uss_min", r.r_uss_min)?;
            d.set_item("m_ldp_lower", r.m_ldp_lower)?;
            d.set_item("method", r.method.to_string())?;
            Ok(d)
        })
        .collect()
}

/// Monte-Carlo run of the uBD scheme at `P^(β)` (default `β = α`).
/// Without `alpha` and `t` the saddle point is used.
#[pyfunction]
#[pyo3(signature = (w, v, eps, alpha = None, t = None, beta = None, n = 50_000, trials = 20, seed = 0, workers = None))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    w: usize,
    v: usize,
    eps: f64,
    alpha: Option<f64>,
    t: Option<Vec<f64>>,
    beta: Option<f64>,
    n: u64,
    trials: usize,
    seed: u64,
    workers: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let part = Partition::new(w, v).map_err(err)?;
    let (alpha, t) = match (alpha, t) {
        (Some(a), Some(t)) => (a, t),
        (None, None) => {
            let s = Problem::new(w, v, eps).and_then(|p| p.solve()).map_err(err)?;
            (s.alpha_star, s.t_star)
        }
        _ => return Err(PyValueError::new_err("give both alpha and t, or neither")),
    };
    let cfg = SimConfig { n, trials, seed, workers: workers.unwrap_or_else(default_workers) };
    let r = py
        .detach(|| {
            let m = ubd_streaming(&part, eps, &Mixture::new(t)?)?;
            let table = EstimatorTable::for_mechanism(&m, alpha)?;
            let p = p_alpha(&part, beta.unwrap_or(alpha))?;
            run_trials(&m, &table, &p, &cfg)
        })
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("n", r.n)?;
    d.set_item("trials", r.trials)?;
    d.set_item("mean_scaled_mse", r.mean_scaled_mse)?;
    d.set_item("stderr", r.stderr)?;
    d.set_item("theory", r.theory)?;
    d.set_item("mean_estimate", r.mean_estimate)?;
    Ok(d)
}

/// Dense uBD mechanism for mixture `t`, as JSON.
#[pyfunction]
fn export_mechanism(w: usize, v: usize, eps: f64, t: Vec<f64>) -> PyResult<String> {
    let part = Partition::new(w, v).map_err(err)?;
    let t = Mixture::new(t).map_err(err)?;
    ubd_mechanism(&part, eps, &t, None).and_then(|m| m.to_json()).map_err(err)
}

/// Checks a mechanism JSON document; returns `(ok, message)`.
#[pyfunction]
fn validate_mechanism(text: &str) -> PyResult<(bool, String)> {
    let m = Mechanism::from_json(text).map_err(err)?;
    Ok(match validate_uldp(&m) {
        UldpReport::Valid => (true, format!("{}-ULDP", m.epsilon())),
        UldpReport::Invalid(why) => (false, why.to_string()),
    })
}

#[pymodule]
fn uldp_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(objective, m)?)?;
    m.add_function(wrap_pyfunction!(ldp_optimum, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(export_mechanism, m)?)?;
    m.add_function(wrap_pyfunction!(validate_mechanism, m)?)?;
    Ok(())
}
