//! Python bindings. Results come back as plain dicts and lists; infinite values are floats.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;
use serde_json::Value;

use declab::decoupling::{diamond as core_diamond, full_report};
use declab::ekeland::ekeland_on_cloud as core_ekeland;
use declab::gallery::run_gallery as core_gallery;
use declab::multiplier::{intersection_rule_verify as core_intersect, multiplier_search as core_multiplier, sum_rule_verify as core_sum_rule};
use declab::problem::Problem as CoreProblem;
use declab::semicontinuity::{certify as core_certify, certify_near, LscProperty};
use declab::sparse_control::{project_box as core_project_box, sharp_stationarity_check, solve_sparse_oc as core_solve, ControlInstance};
use declab::subdifferential::{is_subgradient as core_is_subgradient, SubgradientQuery};
use declab::{Region, SampleScheme};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) if !n.is_f64() => i.into_pyobject(py)?.into_any(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) if s == "inf" => f64::INFINITY.into_pyobject(py)?.into_any(),
        Value::String(s) if s == "-inf" => f64::NEG_INFINITY.into_pyobject(py)?.into_any(),
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(a) => {
            let items = a.iter().map(|x| to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(m) => {
            let d = PyDict::new(py);
            for (k, x) in m {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn result<'py, T: Serialize>(py: Python<'py>, r: declab::Result<T>) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(r.map_err(err)?).map_err(err)?;
    to_py(py, &v)
}

/// Sampling settings; unspecified fields keep their defaults.
#[pyclass(name = "Scheme", from_py_object)]
#[derive(Clone)]
struct PyScheme {
    inner: SampleScheme,
}

#[pymethods]
impl PyScheme {
    #[new]
    #[pyo3(signature = (seed=None, levels=None, eta0=None, stages=None, tol=None, window=None))]
    fn new(
        seed: Option<u64>,
        levels: Option<usize>,
        eta0: Option<f64>,
        stages: Option<usize>,
        tol: Option<f64>,
        window: Option<(Vec<f64>, Vec<f64>)>,
    ) -> Self {
        let mut s = SampleScheme::default();
        if let Some(v) = seed {
            s.seed = v;
        }
        if let Some(v) = levels {
            s.levels = v;
        }
        if let Some(v) = eta0 {
            s.eta0 = v;
        }
        if let Some(v) = stages {
            s.stages = v;
        }
        if let Some(v) = tol {
            s.tol = v;
        }
        s.window = window;
        PyScheme { inner: s }
    }

    #[getter]
    fn levels(&self) -> usize {
        self.inner.levels
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn __repr__(&self) -> String {
        format!("Scheme(seed={}, levels={}, eta0={}, stages={})", self.inner.seed, self.inner.levels, self.inner.eta0, self.inner.stages)
    }
}

/// A parsed problem file.
#[pyclass(name = "Problem", frozen)]
struct PyProblem {
    inner: CoreProblem,
}

impl PyProblem {
    fn scheme(&self, s: Option<PyScheme>) -> PyResult<SampleScheme> {
        match s {
            Some(s) => Ok(s.inner),
            None => self.inner.scheme().map_err(err),
        }
    }

    fn region(&self, name: Option<&str>) -> PyResult<Region> {
        match name {
            Some(n) => self.inner.region(n),
            None => self.inner.default_region(),
        }
        .map_err(err)
    }
}

#[pymethods]
impl PyProblem {
    #[staticmethod]
    fn parse(src: &str) -> PyResult<Self> {
        CoreProblem::parse(src).map(|p| PyProblem { inner: p }).map_err(err)
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        CoreProblem::from_file(std::path::Path::new(path)).map(|p| PyProblem { inner: p }).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    fn functions(&self) -> Vec<String> {
        self.inner.function_names().into_iter().map(String::from).collect()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    /// Value of a function; +inf outside its domain.
    fn value(&self, name: &str, x: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.function(name).map_err(err)?.value(&x))
    }

    /// The five decoupling quantities, the coupled infimum, traces and verdicts.
    #[pyo3(signature = (f1="f1", f2="f2", region=None, scheme=None))]
    fn decouple<'py>(&self, py: Python<'py>, f1: &str, f2: &str, region: Option<&str>, scheme: Option<PyScheme>) -> PyResult<Bound<'py, PyAny>> {
        let (a, b) = (self.inner.function(f1).map_err(err)?, self.inner.function(f2).map_err(err)?);
        let (u, s) = (self.region(region)?, self.scheme(scheme)?);
        let r = py.detach(|| full_report(&a, &b, &u, &s, s.trace_tol));
        result(py, r)
    }

    #[pyo3(signature = (x1, x2, f1="f1", f2="f2", region=None, scheme=None))]
    #[allow(clippy::too_many_arguments)]
    fn diamond<'py>(
        &self,
        py: Python<'py>,
        x1: Vec<f64>,
        x2: Vec<f64>,
        f1: &str,
        f2: &str,
        region: Option<&str>,
        scheme: Option<PyScheme>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let (a, b) = (self.inner.function(f1).map_err(err)?, self.inner.function(f2).map_err(err)?);
        let (u, s) = (self.region(region)?, self.scheme(scheme)?);
        let r = py.detach(|| core_diamond(&a, &b, &u, &x1, &x2, &s));
        result(py, r)
    }

    /// Certificate of one of uniform, quasiuniform, firm_uniform, firm_quasiuniform.
    #[pyo3(signature = (property, f1="f1", f2="f2", region=None, near=None, scheme=None))]
    #[allow(clippy::too_many_arguments)]
    fn certify<'py>(
        &self,
        py: Python<'py>,
        property: &str,
        f1: &str,
        f2: &str,
        region: Option<&str>,
        near: Option<Vec<f64>>,
        scheme: Option<PyScheme>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let prop: LscProperty = property.parse().map_err(err)?;
        let (a, b) = (self.inner.function(f1).map_err(err)?, self.inner.function(f2).map_err(err)?);
        let s = self.scheme(scheme)?;
        let r = match near {
            Some(x) => py.detach(|| certify_near(&a, &b, &x, prop, &s)),
            None => {
                let u = self.region(region)?;
                py.detach(|| core_certify(&a, &b, &u, prop, &s))
            }
        };
        result(py, r)
    }

    #[pyo3(signature = (function, x, xstar, tol=1e-9))]
    fn is_subgradient<'py>(&self, py: Python<'py>, function: &str, x: Vec<f64>, xstar: Vec<f64>, tol: f64) -> PyResult<Bound<'py, PyAny>> {
        let f = self.inner.function(function).map_err(err)?;
        let r = py.detach(|| core_is_subgradient(&SubgradientQuery::new(&f, &x, &xstar), tol));
        result(py, r)
    }

    #[pyo3(signature = (x, eps, delta, eta, f1="f1", f2="f2", scheme=None))]
    #[allow(clippy::too_many_arguments)]
    fn multiplier_search<'py>(
        &self,
        py: Python<'py>,
        x: Vec<f64>,
        eps: f64,
        delta: f64,
        eta: f64,
        f1: &str,
        f2: &str,
        scheme: Option<PyScheme>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let (a, b) = (self.inner.function(f1).map_err(err)?, self.inner.function(f2).map_err(err)?);
        let s = self.scheme(scheme)?;
        let r = py.detach(|| core_multiplier(&a, &b, &x, eps, delta, eta, &s));
        result(py, r)
    }

    #[pyo3(signature = (x, xstar, eps, f1="f1", f2="f2", scheme=None))]
    #[allow(clippy::too_many_arguments)]
    fn sum_rule<'py>(
        &self,
        py: Python<'py>,
        x: Vec<f64>,
        xstar: Vec<f64>,
        eps: f64,
        f1: &str,
        f2: &str,
        scheme: Option<PyScheme>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let (a, b) = (self.inner.function(f1).map_err(err)?, self.inner.function(f2).map_err(err)?);
        let s = self.scheme(scheme)?;
        let r = py.detach(|| core_sum_rule(&a, &b, &x, &xstar, eps, &s));
        result(py, r)
    }

    #[pyo3(signature = (set1, set2, x, xstar, eps, scheme=None))]
    #[allow(clippy::too_many_arguments)]
    fn intersection_rule<'py>(
        &self,
        py: Python<'py>,
        set1: &str,
        set2: &str,
        x: Vec<f64>,
        xstar: Vec<f64>,
        eps: f64,
        scheme: Option<PyScheme>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let (o1, o2) = (self.inner.set(set1).map_err(err)?, self.inner.set(set2).map_err(err)?);
        let s = self.scheme(scheme)?;
        let r = py.detach(|| core_intersect(&o1, &o2, &x, &xstar, eps, &s));
        result(py, r)
    }

    fn __repr__(&self) -> String {
        format!("Problem(dim={}, functions={:?})", self.inner.dim, self.inner.function_names())
    }
}

/// Ekeland point of a finite cloud started from `base`.
#[pyfunction]
fn ekeland_on_cloud<'py>(py: Python<'py>, points: Vec<Vec<f64>>, values: Vec<f64>, base: Vec<f64>, eps: f64) -> PyResult<Bound<'py, PyAny>> {
    let r = py.detach(|| core_ekeland(&points, &values, &base, eps));
    result(py, r)
}

/// Exact minimizer of a separable sparse control instance, with its stationarity check.
#[pyfunction]
#[pyo3(signature = (weights, xa, xb, z, sigma=1.0, sigma0=0.0))]
fn solve_sparse_oc<'py>(py: Python<'py>, weights: Vec<f64>, xa: Vec<f64>, xb: Vec<f64>, z: Vec<f64>, sigma: f64, sigma0: f64) -> PyResult<Bound<'py, PyAny>> {
    let prob = ControlInstance { weights, xa, xb, sigma, sigma0, z }.to_problem().map_err(err)?;
    let sol = core_solve(&prob).map_err(err)?;
    let check = sharp_stationarity_check(&prob, &sol.xopt, 1e-9).map_err(err)?;
    let v = serde_json::json!({ "xopt": sol.xopt, "objective": sol.objective, "stationarity": check });
    to_py(py, &v)
}

#[pyfunction]
fn project_box(x: Vec<f64>, xa: Vec<f64>, xb: Vec<f64>) -> PyResult<Vec<f64>> {
    core_project_box(&x, &xa, &xb).map_err(err)
}

/// Runs the worked-example gallery; `filter` is an id, an id prefix or a pattern with *.
#[pyfunction]
#[pyo3(signature = (filter=None, seed=0))]
fn run_gallery<'py>(py: Python<'py>, filter: Option<String>, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let s = SampleScheme::default().with_seed(seed);
    let summary = py.detach(|| core_gallery(filter.as_deref(), &s));
    result(py, Ok(summary))
}

#[pymodule]
fn declab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScheme>()?;
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(ekeland_on_cloud, m)?)?;
    m.add_function(wrap_pyfunction!(solve_sparse_oc, m)?)?;
    m.add_function(wrap_pyfunction!(project_box, m)?)?;
    m.add_function(wrap_pyfunction!(run_gallery, m)?)?;
    Ok(())
}
