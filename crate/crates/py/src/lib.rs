//! Python bindings for `credal_lln`.
//!
//! Functions of a real argument may be passed either as a Python callable or as a
//! named function string such as `"square"` or `"bump:0.5:0.25"`. Heavy computations
//! release the interpreter; Python callables re-attach for each evaluation.

use std::sync::Mutex;

use credal_lln::analyze;
use credal_lln::credal::{CredalSet, Event, FinitePmf};
use credal_lln::functions::NamedFunction;
use credal_lln::pengdp::{self, Sense};
use credal_lln::simulate::{self, PolicySpec, SamplePath, DEFAULT_RHO};
use credal_lln::sublin::{self, Capacity};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: credal_lln::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A real function given from Python.
enum RealFn {
    Named(NamedFunction),
    Callable(Py<PyAny>),
}

impl RealFn {
    fn extract(obj: &Bound<'_, PyAny>) -> PyResult<Self> {
        if let Ok(name) = obj.extract::<String>() {
            return name.parse().map(RealFn::Named).map_err(to_py);
        }
        if obj.is_callable() {
            return Ok(RealFn::Callable(obj.clone().unbind()));
        }
        Err(PyValueError::new_err("expected a callable or a function name"))
    }
}

/// Evaluates Python callables from any thread, remembering the first error.
struct Evaluator {
    error: Mutex<Option<PyErr>>,
}

impl Evaluator {
    fn new() -> Self {
        Self { error: Mutex::new(None) }
    }

    fn call(&self, invoke: impl FnOnce(Python<'_>) -> PyResult<f64>) -> f64 {
        Python::attach(|py| match invoke(py) {
            Ok(v) => v,
            Err(e) => {
                self.error.lock().unwrap().get_or_insert(e);
                f64::NAN
            }
        })
    }

    fn real<'a>(&'a self, f: &'a RealFn) -> impl Fn(f64) -> f64 + Sync + 'a {
        move |x| match f {
            RealFn::Named(n) => n.eval(x),
            RealFn::Callable(c) => self.call(|py| c.call1(py, (x,))?.extract(py)),
        }
    }

    fn path<'a>(&'a self, f: &'a Py<PyAny>) -> impl Fn(&[f64]) -> f64 + 'a {
        move |xs| self.call(|py| f.call1(py, (xs.to_vec(),))?.extract(py))
    }

    /// Prefers the Python exception over the library error it caused.
    fn finish<T>(self, result: credal_lln::Result<T>) -> PyResult<T> {
        match self.error.into_inner().unwrap() {
            Some(e) => Err(e),
            None => result.map_err(to_py),
        }
    }
}

#[pyclass(name = "FinitePmf", module = "credal_lln", frozen, from_py_object)]
#[derive(Clone)]
struct PyFinitePmf {
    inner: FinitePmf,
}

#[pymethods]
impl PyFinitePmf {
    #[new]
    fn new(values: Vec<f64>, probs: Vec<f64>) -> PyResult<Self> {
        FinitePmf::new(&values, &probs).map(|inner| Self { inner }).map_err(to_py)
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values().collect()
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.inner.probs().collect()
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn variance(&self) -> f64 {
        self.inner.variance()
    }

    fn expectation(&self, py: Python<'_>, f: &Bound<'_, PyAny>) -> PyResult<f64> {
        let f = RealFn::extract(f)?;
        let ev = Evaluator::new();
        let r = py.detach(|| self.inner.expectation(&ev.real(&f)));
        ev.finish(r)
    }

    fn __repr__(&self) -> String {
        let atoms: Vec<String> = self.inner.atoms().iter().map(|(x, p)| format!("{x}: {p}")).collect();
        format!("FinitePmf({{{}}})", atoms.join(", "))
    }
}

#[pyclass(name = "CredalSet", module = "credal_lln", frozen, from_py_object)]
#[derive(Clone)]
struct PyCredalSet {
    inner: CredalSet,
}

#[pymethods]
impl PyCredalSet {
    #[new]
    fn new(priors: Vec<PyFinitePmf>) -> PyResult<Self> {
        CredalSet::new(priors.into_iter().map(|p| p.inner).collect()).map(|inner| Self { inner }).map_err(to_py)
    }

    /// Parses `{"priors": [{"values": [...], "probs": [...]}, ...]}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        CredalSet::from_json_str(text).map(|inner| Self { inner }).map_err(to_py)
    }

    #[getter]
    fn priors(&self) -> Vec<PyFinitePmf> {
        self.inner.priors().iter().map(|p| PyFinitePmf { inner: p.clone() }).collect()
    }

    #[getter]
    fn union_support(&self) -> Vec<f64> {
        self.inner.union_support().to_vec()
    }

    #[getter]
    fn mu_upper(&self) -> f64 {
        self.inner.mu_upper()
    }

    #[getter]
    fn mu_lower(&self) -> f64 {
        self.inner.mu_lower()
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("CredalSet(priors={}, mean=[{}, {}])", self.inner.len(), self.inner.mu_lower(), self.inner.mu_upper())
    }
}

#[pyclass(name = "SamplePath", module = "credal_lln", frozen)]
struct PySamplePath {
    inner: SamplePath,
}

#[pymethods]
impl PySamplePath {
    #[getter]
    fn xs(&self) -> Vec<f64> {
        self.inner.xs.clone()
    }

    #[getter]
    fn policy_trace(&self) -> Vec<usize> {
        self.inner.policy_trace.clone()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn credal_id(&self) -> String {
        self.inner.credal_id.clone()
    }

    fn running_averages(&self) -> PyResult<Vec<f64>> {
        analyze::running_averages(&self.inner).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

fn sense(name: &str) -> PyResult<Sense> {
    match name {
        "upper" => Ok(Sense::Upper),
        "lower" => Ok(Sense::Lower),
        other => Err(PyValueError::new_err(format!("sense must be 'upper' or 'lower', got '{other}'"))),
    }
}

#[pyfunction]
fn upper_expectation(py: Python<'_>, cs: &PyCredalSet, f: &Bound<'_, PyAny>) -> PyResult<f64> {
    let f = RealFn::extract(f)?;
    let ev = Evaluator::new();
    let r = py.detach(|| sublin::upper_expectation(&cs.inner, &ev.real(&f)));
    ev.finish(r)
}

#[pyfunction]
fn lower_expectation(py: Python<'_>, cs: &PyCredalSet, f: &Bound<'_, PyAny>) -> PyResult<f64> {
    let f = RealFn::extract(f)?;
    let ev = Evaluator::new();
    let r = py.detach(|| sublin::lower_expectation(&cs.inner, &ev.real(&f)));
    ev.finish(r)
}

#[pyfunction]
fn upper_capacity(cs: &PyCredalSet, event: Vec<f64>) -> PyResult<f64> {
    sublin::upper_capacity(&cs.inner, &Event::new(event)).map_err(to_py)
}

#[pyfunction]
fn lower_capacity(cs: &PyCredalSet, event: Vec<f64>) -> PyResult<f64> {
    sublin::lower_capacity(&cs.inner, &Event::new(event)).map_err(to_py)
}

/// Choquet integral of the identity against the upper or lower capacity.
#[pyfunction]
#[pyo3(signature = (cs, sense = "upper"))]
fn choquet_integral(cs: &PyCredalSet, sense: &str) -> PyResult<f64> {
    let cap = match sense {
        "upper" => Capacity::Upper,
        "lower" => Capacity::Lower,
        other => return Err(PyValueError::new_err(format!("sense must be 'upper' or 'lower', got '{other}'"))),
    };
    Ok(sublin::choquet_integral(&cs.inner, cap))
}

#[pyfunction]
fn axioms_check<'py>(
    py: Python<'py>,
    cs: &PyCredalSet,
    f: &Bound<'py, PyAny>,
    g: &Bound<'py, PyAny>,
    lam: f64,
    c: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let (f, g) = (RealFn::extract(f)?, RealFn::extract(g)?);
    let ev = Evaluator::new();
    let r = py.detach(|| sublin::axioms_check(&cs.inner, &ev.real(&f), &ev.real(&g), lam, c));
    let r = ev.finish(r)?;
    let d = PyDict::new(py);
    d.set_item("monotonicity", r.monotonicity)?;
    d.set_item("constant_preserving", r.constant_preserving)?;
    d.set_item("sub_additivity", r.sub_additivity)?;
    d.set_item("positive_homogeneity", r.positive_homogeneity)?;
    Ok(d)
}

/// Upper (or lower) expectation of `g(S_n)` under the Peng-IID product.
#[pyfunction]
#[pyo3(signature = (cs, n, g, sense = "upper", lattice_cap = pengdp::DEFAULT_LATTICE_CAP))]
fn peng_sum(
    py: Python<'_>,
    cs: &PyCredalSet,
    n: usize,
    g: &Bound<'_, PyAny>,
    sense: &str,
    lattice_cap: usize,
) -> PyResult<f64> {
    let (g, sense) = (RealFn::extract(g)?, self::sense(sense)?);
    let ev = Evaluator::new();
    let r = py.detach(|| pengdp::peng_sum(&cs.inner, n, &ev.real(&g), sense, lattice_cap));
    ev.finish(r)
}

/// Upper (or lower) expectation of `phi([x_1, .., x_n])` by history-tree recursion.
#[pyfunction]
#[pyo3(signature = (cs, n, phi, sense = "upper"))]
fn peng_path(py: Python<'_>, cs: &PyCredalSet, n: usize, phi: Py<PyAny>, sense: &str) -> PyResult<f64> {
    let sense = self::sense(sense)?;
    let ev = Evaluator::new();
    let r = py.detach(|| pengdp::peng_path(&cs.inner, n, &ev.path(&phi), sense));
    ev.finish(r)
}

/// `(upper, lower)` over all adapted prior-selection strategies, by enumeration.
#[pyfunction]
fn strategy_oracle(py: Python<'_>, cs: &PyCredalSet, n: usize, phi: Py<PyAny>) -> PyResult<(f64, f64)> {
    let ev = Evaluator::new();
    let r = py.detach(|| pengdp::brute_force_strategy_oracle(&cs.inner, n, &ev.path(&phi)));
    ev.finish(r).map(|p| (p.upper, p.lower))
}

#[pyfunction]
fn joint_capacity_factorization<'py>(
    py: Python<'py>,
    cs: &PyCredalSet,
    d: Vec<f64>,
    g: Vec<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = pengdp::joint_capacity_factorization(&cs.inner, &Event::new(d), &Event::new(g)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("joint_upper", r.joint_upper)?;
    out.set_item("product_upper", r.product_upper)?;
    out.set_item("joint_lower", r.joint_lower)?;
    out.set_item("product_lower", r.product_lower)?;
    out.set_item("holds", r.holds())?;
    Ok(out)
}

/// `([(n, upper E[phi(S_n/n)]), ..], sup of phi over the mean interval)`.
#[pyfunction]
fn weak_lln_curve(
    py: Python<'_>,
    cs: &PyCredalSet,
    phi: &Bound<'_, PyAny>,
    ns: Vec<usize>,
) -> PyResult<(Vec<(usize, f64)>, f64)> {
    let phi = RealFn::extract(phi)?;
    let ev = Evaluator::new();
    let r = py.detach(|| pengdp::weak_lln_curve(&cs.inner, &ev.real(&phi), &ns));
    ev.finish(r).map(|c| (c.points, c.target))
}

/// `[(n, lambda, value), ..]` for the exponential-moment product.
#[pyfunction]
fn lemma4_product_bound(cs: &PyCredalSet, m: f64, ns: Vec<usize>) -> PyResult<Vec<(usize, f64, f64)>> {
    let points = pengdp::lemma4_product_bound(&cs.inner, m, &ns).map_err(to_py)?;
    Ok(points.iter().map(|p| (p.n, p.lambda, p.value)).collect())
}

/// `(lhs, rhs, holds)` of the capacity Chebyshev bound.
#[pyfunction]
fn chebyshev_capacity_bound(
    py: Python<'_>,
    cs: &PyCredalSet,
    epsilon: f64,
    m: f64,
    n: usize,
) -> PyResult<(f64, f64, bool)> {
    let r = py.detach(|| pengdp::chebyshev_capacity_bound(&cs.inner, epsilon, m, n)).map_err(to_py)?;
    Ok((r.lhs, r.rhs, r.holds))
}

fn policy(cs: &CredalSet, text: &str, rho: f64) -> PyResult<simulate::PriorPolicy> {
    let spec = match PolicySpec::parse(text, rho).map_err(to_py)? {
        PolicySpec::BlockTargets { targets, rho, interleave } if targets.is_empty() => {
            PolicySpec::BlockTargets { targets: simulate::default_targets(cs), rho, interleave }
        }
        other => other,
    };
    spec.build(cs).map_err(to_py)
}

/// Simulates `n` steps under a policy given in short form
/// (`max`, `min`, `index:i`, `periodic:i,j`, `blocks:t1,t2`, `blocks-random:t1,t2`).
#[pyfunction]
#[pyo3(signature = (cs, policy, n, seed, rho = DEFAULT_RHO))]
fn sample_path(
    py: Python<'_>,
    cs: &PyCredalSet,
    policy: &str,
    n: usize,
    seed: u64,
    rho: f64,
) -> PyResult<PySamplePath> {
    let policy = self::policy(&cs.inner, policy, rho)?;
    py.detach(|| simulate::sample_path(&cs.inner, &policy, n, seed)).map(|inner| PySamplePath { inner }).map_err(to_py)
}

#[pyfunction]
fn running_averages(xs: Vec<f64>) -> PyResult<Vec<f64>> {
    analyze::averages_of(&xs).map_err(to_py)
}

/// `(tail_sup, tail_inf, final_mean)` of the running average over `[n0, n]`.
#[pyfunction]
fn tail_stats(xs: Vec<f64>, n0: usize) -> PyResult<(f64, f64, f64)> {
    let s = analyze::tail_stats_of(&analyze::averages_of(&xs).map_err(to_py)?, n0).map_err(to_py)?;
    Ok((s.tail_sup, s.tail_inf, s.final_mean))
}

/// `[(target, distance, at, hit), ..]` for the running average over `[n0, n]`.
#[pyfunction]
fn cluster_coverage(
    xs: Vec<f64>,
    targets: Vec<f64>,
    n0: usize,
    epsilon: f64,
) -> PyResult<Vec<(f64, f64, usize, bool)>> {
    let avgs = analyze::averages_of(&xs).map_err(to_py)?;
    let r = analyze::cluster_coverage_of(&avgs, &targets, n0, epsilon).map_err(to_py)?;
    Ok(r.hits.iter().map(|h| (h.target, h.distance, h.at, h.hit)).collect())
}

/// Fraction of paths whose tail running average leaves `[mu_lower - eps, mu_upper + eps]`.
#[pyfunction]
fn violation_rate(
    paths: Vec<PyRef<'_, PySamplePath>>,
    mu_lower: f64,
    mu_upper: f64,
    epsilon: f64,
    n0: usize,
) -> PyResult<f64> {
    let owned: Vec<SamplePath> = paths.iter().map(|p| p.inner.clone()).collect();
    analyze::violation_rate(&owned, mu_lower, mu_upper, epsilon, n0).map_err(to_py)
}

#[pymodule]
#[pyo3(name = "credal_lln")]
fn credal_lln_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFinitePmf>()?;
    m.add_class::<PyCredalSet>()?;
    m.add_class::<PySamplePath>()?;
    m.add_function(wrap_pyfunction!(upper_expectation, m)?)?;
    m.add_function(wrap_pyfunction!(lower_expectation, m)?)?;
    m.add_function(wrap_pyfunction!(upper_capacity, m)?)?;
    m.add_function(wrap_pyfunction!(lower_capacity, m)?)?;
    m.add_function(wrap_pyfunction!(choquet_integral, m)?)?;
    m.add_function(wrap_pyfunction!(axioms_check, m)?)?;
    m.add_function(wrap_pyfunction!(peng_sum, m)?)?;
    m.add_function(wrap_pyfunction!(peng_path, m)?)?;
    m.add_function(wrap_pyfunction!(strategy_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(joint_capacity_factorization, m)?)?;
    m.add_function(wrap_pyfunction!(weak_lln_curve, m)?)?;
    m.add_function(wrap_pyfunction!(lemma4_product_bound, m)?)?;
    m.add_function(wrap_pyfunction!(chebyshev_capacity_bound, m)?)?;
    m.add_function(wrap_pyfunction!(sample_path, m)?)?;
    m.add_function(wrap_pyfunction!(running_averages, m)?)?;
    m.add_function(wrap_pyfunction!(tail_stats, m)?)?;
    m.add_function(wrap_pyfunction!(cluster_coverage, m)?)?;
    m.add_function(wrap_pyfunction!(violation_rate, m)?)?;
    m.add("GENERATOR", credal_lln::rng::GENERATOR_NAME)?;
    Ok(())
}
