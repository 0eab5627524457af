//! Python bindings for `smoothflow`.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use smoothflow::analysis::{self, RateModel};
use smoothflow::approx::{self, SmoothApprox};
use smoothflow::flow;
use smoothflow::harness::{generate_problem, GeneratedProblem, ProblemConfig, Smoothing};
use smoothflow::problem::CompositeProblem;
use smoothflow::schedule::{MuDesign, Schedule};
use smoothflow::solver::{self, SgmOptions};
use smoothflow::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidDimension(_)
        | Error::DimensionMismatch(_)
        | Error::InvalidParameter(_)
        | Error::AffineTerm { .. }
        | Error::Config(_)
        | Error::InvalidSeries(_)
        | Error::Unsupported(_)
        | Error::UndefinedBound(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Least squares plus ℓ1 problem with a smoothed ℓ1 term.
#[pyclass(name = "Problem", frozen)]
struct PyProblem {
    inner: GeneratedProblem,
}

impl PyProblem {
    fn p(&self) -> &CompositeProblem {
        &self.inner.problem
    }
}

#[pymethods]
impl PyProblem {
    /// Random problem `‖Ax − b‖² + ‖Cx − d‖₁` with known minimiser.
    #[staticmethod]
    #[pyo3(signature = (n_x, n_a, n_c, seed=0, smoothing="sqrt"))]
    fn generate(n_x: usize, n_a: usize, n_c: usize, seed: u64, smoothing: &str) -> PyResult<Self> {
        let smoothing = match smoothing {
            "sqrt" => Smoothing::Sqrt,
            "huber" => Smoothing::Huber,
            other => return Err(PyValueError::new_err(format!("unknown smoothing {other:?}"))),
        };
        let cfg = ProblemConfig { n_x, n_a, n_c, rng_seed: seed };
        Ok(Self { inner: generate_problem(&cfg, smoothing).map_err(to_py)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.p().dim()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.p().sigma()
    }

    #[getter]
    fn lipschitz(&self) -> f64 {
        self.p().lipschitz()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.p().params().alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.p().params().beta
    }

    #[getter]
    fn optimum(&self) -> Vec<f64> {
        self.inner.data.x_star.clone()
    }

    fn true_value(&self, x: Vec<f64>) -> PyResult<f64> {
        self.p().check_dim(&x).map_err(to_py)?;
        Ok(self.p().true_value(&x))
    }

    fn smoothed_value(&self, x: Vec<f64>, mu: f64) -> PyResult<f64> {
        self.p().smoothed_value(&x, mu).map_err(to_py)
    }

    fn smoothed_grad(&self, x: Vec<f64>, mu: f64) -> PyResult<Vec<f64>> {
        self.p().smoothed_grad(&x, mu).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem(dim={}, sigma={:.6e}, lipschitz={:.6e})",
            self.dim(),
            self.sigma(),
            self.lipschitz()
        )
    }
}

/// Smoothing parameter schedule.
#[pyclass(name = "Schedule", frozen)]
struct PySchedule {
    inner: Schedule,
}

impl PySchedule {
    fn checked(inner: Schedule) -> PyResult<Self> {
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    fn design(&self) -> PyResult<(MuDesign, f64)> {
        match &self.inner {
            Schedule::ContinuousDriven { design, t0 } => Ok((design.clone(), *t0)),
            _ => Err(PyValueError::new_err("the flow integrators need a continuous schedule")),
        }
    }
}

#[pymethods]
impl PySchedule {
    /// `μ_k = μ₀ (k + 1)^(−γ)`.
    #[staticmethod]
    #[pyo3(signature = (gamma, mu0=1.0))]
    fn power(gamma: f64, mu0: f64) -> PyResult<Self> {
        Self::checked(Schedule::PowerDecay { mu0, gamma })
    }

    /// `μ_k = μ₀ λ^k`.
    #[staticmethod]
    #[pyo3(signature = (lam, mu0=1.0))]
    fn exponential(lam: f64, mu0: f64) -> PyResult<Self> {
        Self::checked(Schedule::ExpDecay { mu0, lambda: lam })
    }

    #[staticmethod]
    fn constant(mu0: f64) -> PyResult<Self> {
        Self::checked(Schedule::Constant { mu0 })
    }

    /// `μ(t) = μ₀ − rate (t − t₀)`.
    #[staticmethod]
    #[pyo3(signature = (rate, mu0=1.0, t0=1.0))]
    fn continuous_linear(rate: f64, mu0: f64, t0: f64) -> PyResult<Self> {
        Self::checked(Schedule::ContinuousDriven { design: MuDesign::Linear { mu0, rate, t0 }, t0 })
    }

    /// `μ(t) = μ₀ e^(−γ (t − t₀))`.
    #[staticmethod]
    #[pyo3(signature = (gamma, mu0=1.0, t0=1.0))]
    fn continuous_exponential(gamma: f64, mu0: f64, t0: f64) -> PyResult<Self> {
        Self::checked(Schedule::ContinuousDriven { design: MuDesign::Exponential { mu0, gamma, t0 }, t0 })
    }

    /// `μ(t) = μ₀ (1 + t − t₀)^(−p)`.
    #[staticmethod]
    #[pyo3(signature = (power, mu0=1.0, t0=1.0))]
    fn continuous_reciprocal(power: f64, mu0: f64, t0: f64) -> PyResult<Self> {
        Self::checked(Schedule::ContinuousDriven { design: MuDesign::Reciprocal { mu0, power, t0 }, t0 })
    }

    fn __repr__(&self) -> String {
        format!("Schedule({})", self.inner.descriptor())
    }
}

/// Column-oriented result of a solver run.
#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory {
    inner: solver::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn status(&self) -> &'static str {
        self.inner.status.as_str()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps
    }

    #[getter]
    fn grad_evals(&self) -> u64 {
        self.inner.grad_evals
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.last().x.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.records.len()
    }

    /// Dict of per-record columns. Missing values are `None`.
    fn columns<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = &self.inner.records;
        let d = PyDict::new(py);
        d.set_item("k", r.iter().map(|r| r.k).collect::<Vec<_>>())?;
        d.set_item("t", r.iter().map(|r| r.t).collect::<Vec<_>>())?;
        d.set_item("s", r.iter().map(|r| r.s).collect::<Vec<_>>())?;
        d.set_item("mu", r.iter().map(|r| r.mu).collect::<Vec<_>>())?;
        d.set_item("f_tilde", r.iter().map(|r| r.f_tilde).collect::<Vec<_>>())?;
        d.set_item("f_true", r.iter().map(|r| r.f_true).collect::<Vec<_>>())?;
        d.set_item("grad_norm", r.iter().map(|r| r.grad_norm).collect::<Vec<_>>())?;
        d.set_item("lyapunov", r.iter().map(|r| r.lyapunov).collect::<Vec<_>>())?;
        d.set_item("bound", r.iter().map(|r| r.bound).collect::<Vec<_>>())?;
        d.set_item("grad_evals", r.iter().map(|r| r.grad_evals).collect::<Vec<_>>())?;
        Ok(d)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv_string()
    }
}

/// Smoothing gradient method. Continuous schedules give forward Euler on the flow.
#[pyfunction]
#[pyo3(signature = (problem, schedule, x0=None, max_steps=1000, stride=1, grad_eval_budget=None, tolerance=None))]
#[allow(clippy::too_many_arguments)]
fn run_sgm(
    py: Python<'_>,
    problem: &PyProblem,
    schedule: &PySchedule,
    x0: Option<Vec<f64>>,
    max_steps: usize,
    stride: usize,
    grad_eval_budget: Option<u64>,
    tolerance: Option<f64>,
) -> PyResult<PyTrajectory> {
    let x0 = x0.unwrap_or_else(|| vec![0.0; problem.dim()]);
    let opts = SgmOptions { stride, grad_eval_budget, tolerance, ..SgmOptions::with_steps(max_steps) };
    let tr = py
        .detach(|| solver::run_sgm(problem.p(), &schedule.inner, &x0, &opts))
        .map_err(to_py)?;
    Ok(PyTrajectory { inner: tr })
}

/// Adaptive Dormand–Prince integration of the smoothed gradient flow.
#[pyfunction]
#[pyo3(signature = (problem, schedule, t_end, x0=None, rtol=1e-6, atol=1e-9))]
fn integrate_rk45<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    schedule: &PySchedule,
    t_end: f64,
    x0: Option<Vec<f64>>,
    rtol: f64,
    atol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let (design, t0) = schedule.design()?;
    let x0 = x0.unwrap_or_else(|| vec![0.0; problem.dim()]);
    let run = py
        .detach(|| flow::integrate_rk45(problem.p(), &design, &x0, t0, t_end, rtol, atol))
        .map_err(to_py)?;
    let s = &run.samples;
    let d = PyDict::new(py);
    d.set_item("t", s.iter().map(|s| s.t).collect::<Vec<_>>())?;
    d.set_item("mu", s.iter().map(|s| s.mu).collect::<Vec<_>>())?;
    d.set_item("f_true", s.iter().map(|s| s.f_true).collect::<Vec<_>>())?;
    d.set_item("lyapunov_v", s.iter().map(|s| s.lyapunov_v).collect::<Vec<_>>())?;
    d.set_item("bound_ct", s.iter().map(|s| s.bound_ct).collect::<Vec<_>>())?;
    d.set_item("grad_evals", s.iter().map(|s| s.grad_evals).collect::<Vec<_>>())?;
    d.set_item("x", s.last().map(|s| s.x.clone()))?;
    d.set_item("accepted", run.accepted)?;
    d.set_item("rejected", run.rejected)?;
    Ok(d)
}

/// Randomised check of the smoothing contract for a built-in approximation.
#[pyfunction]
#[pyo3(signature = (kind, dim, samples=1000, seed=0))]
fn certify<'py>(py: Python<'py>, kind: &str, dim: usize, samples: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let a: Arc<dyn SmoothApprox> = match kind {
        "sqrt" => Arc::new(approx::sqrt_l2_approx(dim).map_err(to_py)?),
        "huber" => Arc::new(approx::huber_l2_approx(dim).map_err(to_py)?),
        "log_sum_exp" => Arc::new(approx::log_sum_exp_max_approx(dim).map_err(to_py)?),
        other => return Err(PyValueError::new_err(format!("unknown approximation {other:?}"))),
    };
    let r = approx::certify(a.as_ref(), samples, seed);
    let d = PyDict::new(py);
    d.set_item("pass", r.pass)?;
    d.set_item("samples", r.samples)?;
    d.set_item("excluded", r.excluded)?;
    d.set_item("sandwich_violation", r.sandwich_violation)?;
    d.set_item("grad_mu_range_violation", r.grad_mu_range_violation)?;
    d.set_item("grad_x_rel_error", r.grad_x_rel_error)?;
    d.set_item("grad_mu_rel_error", r.grad_mu_rel_error)?;
    d.set_item("smoothness_ratio", r.smoothness_ratio)?;
    d.set_item("convexity_violation", r.convexity_violation)?;
    Ok(d)
}

/// Bounds on elapsed time, `μ_k` and `k` after `k` steps that took `elapsed` time.
#[pyfunction]
#[pyo3(signature = (schedule, k, elapsed, lipschitz=0.0, alpha=1.0))]
fn timeline_bounds<'py>(
    py: Python<'py>,
    schedule: &PySchedule,
    k: usize,
    elapsed: f64,
    lipschitz: f64,
    alpha: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let b = match schedule.inner {
        Schedule::PowerDecay { mu0, gamma } => analysis::timeline_bounds_power(lipschitz, alpha, mu0, gamma, k, elapsed),
        Schedule::ExpDecay { mu0, lambda } => {
            analysis::timeline_bounds_exponential(lipschitz, alpha, mu0, lambda, k, elapsed)
        }
        _ => return Err(PyValueError::new_err("timeline bounds need a power or exponential schedule")),
    }
    .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("k", b.k)?;
    d.set_item("t_lower", b.t_lower)?;
    d.set_item("t_upper", b.t_upper)?;
    d.set_item("mu_lower", b.mu_lower)?;
    d.set_item("mu_upper", b.mu_upper)?;
    d.set_item("k_lower", b.k_lower)?;
    d.set_item("k_upper", b.k_upper)?;
    Ok(d)
}

/// Least-squares rate fit over `window`. Returns `(exponent, intercept, residual)`.
#[pyfunction]
#[pyo3(signature = (ks, values, model="power", window=(100.0, 10000.0)))]
fn fit_rate(ks: Vec<f64>, values: Vec<f64>, model: &str, window: (f64, f64)) -> PyResult<(f64, f64, f64)> {
    if ks.len() != values.len() {
        return Err(PyValueError::new_err("ks and values differ in length"));
    }
    let model = RateModel::parse(model).map_err(to_py)?;
    let series: Vec<(f64, f64)> = ks.into_iter().zip(values).collect();
    let f = analysis::fit_rate(&series, model, window).map_err(to_py)?;
    Ok((f.exponent, f.intercept, f.residual))
}

#[pymodule]
#[pyo3(name = "smoothflow")]
fn smoothflow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PySchedule>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(run_sgm, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_rk45, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(timeline_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(fit_rate, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
