//! Python bindings: benchmark cases, the distributed IETI-DP solve, scaling
//! studies and B-spline knot vectors.

use ietidp::harness::{run_case_full, CaseConfig, SolveReport, StudyKind};
use ietidp::splines::KnotVector as CoreKnots;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// One benchmark case; keyword arguments use the config-file field names.
#[pyclass(name = "Case", module = "pyietidp")]
struct Case {
    inner: CaseConfig,
}

#[pymethods]
impl Case {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(py: Python<'_>, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let text: String = match kwargs {
            Some(k) => py.import("json")?.call_method1("dumps", (k,))?.extract()?,
            None => "{}".into(),
        };
        let inner: CaseConfig = serde_json::from_str(&text).map_err(value_err)?;
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let inner = CaseConfig::from_toml(text).map_err(value_err)?;
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(value_err)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Case({} {}D {} p={} refine={} workers={})",
            self.inner.formulation,
            self.inner.dim,
            self.inner.grid_label(),
            self.inner.degree,
            self.inner.refine,
            self.inner.workers
        )
    }
}

/// Outcome of [`solve`].
#[pyclass(name = "Solution", module = "pyietidp")]
struct Solution {
    report: SolveReport,
    #[pyo3(get)]
    global_solution: Vec<f64>,
    #[pyo3(get)]
    multipliers: Vec<f64>,
    #[pyo3(get)]
    residuals: Vec<f64>,
    #[pyo3(get)]
    patch_solutions: Vec<Vec<f64>>,
}

#[pymethods]
impl Solution {
    #[getter]
    fn iterations(&self) -> usize {
        self.report.iterations
    }

    #[getter]
    fn condition(&self) -> f64 {
        self.report.condition
    }

    #[getter]
    fn l2_error(&self) -> f64 {
        self.report.l2_error
    }

    #[getter]
    fn solution_hash(&self) -> String {
        self.report.solution_hash.clone()
    }

    /// The report row as a dict.
    fn report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.report)
    }
}

/// Runs the case on its simulated worker group.
#[pyfunction]
fn solve(py: Python<'_>, case: &Case) -> PyResult<Solution> {
    let cfg = case.inner.clone();
    let run = py.detach(move || run_case_full(&cfg)).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let sol = run.solution;
    Ok(Solution { report: run.report, patch_solutions: sol.local(), global_solution: sol.global, multipliers: sol.lambda, residuals: sol.report.residuals })
}

/// Report rows of a `weak`, `strong` or `holders` study over `schedule`.
#[pyfunction]
fn scaling_study<'py>(py: Python<'py>, kind: &str, case: &Case, schedule: Vec<usize>) -> PyResult<Bound<'py, PyAny>> {
    let kind: StudyKind = kind.parse().map_err(value_err)?;
    let cfg = case.inner.clone();
    let study = py.detach(move || ietidp::harness::scaling_study(kind, &cfg, &schedule)).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &study.rows)
}

/// Open B-spline knot vector.
#[pyclass(name = "KnotVector", module = "pyietidp")]
struct KnotVector {
    inner: CoreKnots,
}

#[pymethods]
impl KnotVector {
    #[new]
    fn new(degree: usize, knots: Vec<f64>) -> PyResult<Self> {
        CoreKnots::new(degree, knots).map(|inner| Self { inner }).map_err(value_err)
    }

    #[staticmethod]
    fn uniform(degree: usize, elements: usize) -> PyResult<Self> {
        CoreKnots::uniform(degree, elements).map(|inner| Self { inner }).map_err(value_err)
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree()
    }

    #[getter]
    fn knots(&self) -> Vec<f64> {
        self.inner.knots().to_vec()
    }

    #[getter]
    fn num_basis(&self) -> usize {
        self.inner.num_basis()
    }

    /// `(first, values)`: the `p + 1` nonzero functions at `x` start at `first`.
    fn eval_basis(&self, x: f64) -> PyResult<(usize, Vec<f64>)> {
        self.inner.eval_basis(x).map_err(value_err)
    }

    /// `(first, rows)` with row `k` holding the `k`-th derivatives.
    fn eval_basis_ders(&self, x: f64, order: usize) -> PyResult<(usize, Vec<Vec<f64>>)> {
        self.inner.eval_basis_ders(x, order).map_err(value_err)
    }

    fn greville(&self) -> Vec<f64> {
        self.inner.greville()
    }

    fn __repr__(&self) -> String {
        format!("KnotVector(degree={}, knots={:?})", self.inner.degree(), self.inner.knots())
    }
}

#[pymodule]
fn pyietidp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Case>()?;
    m.add_class::<Solution>()?;
    m.add_class::<KnotVector>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(scaling_study, m)?)?;
    Ok(())
}
