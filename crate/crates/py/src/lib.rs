//! Python bindings. Reports and files cross the boundary as plain Python objects decoded
//! from the same JSON the command-line tool writes.

use pyo3::exceptions::{PyOverflowError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use qsimcost::exact;
use qsimcost::geometry::{self, DirectionSet};
use qsimcost::harness::{self, PmVariant};
use qsimcost::lp::DenseRevisedSimplex;
use qsimcost::scenario::Scenario;
use qsimcost::witness::{self, Table3};
use qsimcost::{Error, DEFAULT_SEED};

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::GuardExceeded { .. } => PyOverflowError::new_err(e.to_string()),
        Error::CertificateNotAchieved { .. } | Error::Lp(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_python<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

fn from_python<T: serde::de::DeserializeOwned>(py: Python<'_>, value: &Bound<'_, PyAny>) -> PyResult<T> {
    let s: String = py.import("json")?.call_method1("dumps", (value,))?.extract()?;
    serde_json::from_str(&s).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn directions(set: &DirectionSet) -> Vec<[f64; 3]> {
    set.vectors.iter().map(|v| v.components()).collect()
}

#[pyclass(module = "qsimcost", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct BlochVector {
    inner: qsimcost::BlochVector,
}

#[pymethods]
impl BlochVector {
    #[new]
    fn new(x: f64, y: f64, z: f64) -> PyResult<Self> {
        qsimcost::BlochVector::new(x, y, z)
            .map(|inner| Self { inner })
            .map_err(to_py_err)
    }

    fn components(&self) -> [f64; 3] {
        self.inner.components()
    }

    fn dot(&self, other: &BlochVector) -> f64 {
        self.inner.dot(&other.inner)
    }

    fn __repr__(&self) -> String {
        let [x, y, z] = self.inner.components();
        format!("BlochVector({x}, {y}, {z})")
    }
}

#[pyclass(module = "qsimcost", frozen, from_py_object)]
#[derive(Clone)]
struct Povm {
    inner: qsimcost::Rank1Povm,
}

#[pymethods]
impl Povm {
    #[staticmethod]
    fn projective(y: &BlochVector) -> Self {
        Self {
            inner: qsimcost::Rank1Povm::projective(y.inner),
        }
    }

    #[staticmethod]
    fn trine() -> Self {
        Self {
            inner: qsimcost::Rank1Povm::trine(),
        }
    }

    /// Rank-1 form `{"elements": [{"p": .., "y": [..]}, ..]}`.
    #[staticmethod]
    fn from_dict(py: Python<'_>, value: &Bound<'_, PyAny>) -> PyResult<Self> {
        Ok(Self {
            inner: from_python(py, value)?,
        })
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_python(py, &self.inner)
    }

    #[getter]
    fn num_outcomes(&self) -> usize {
        self.inner.num_outcomes()
    }

    fn born(&self, state: &BlochVector) -> Vec<f64> {
        qsimcost::qstate::coarse_born_probabilities(&state.inner, &self.inner)
    }
}

#[pyclass(module = "qsimcost", frozen, from_py_object)]
#[derive(Clone)]
struct Behavior {
    inner: witness::Behavior,
}

#[pymethods]
impl Behavior {
    /// Born-rule table for pure `states` and `povms`.
    #[staticmethod]
    fn from_quantum(states: Vec<BlochVector>, povms: Vec<Povm>) -> PyResult<Self> {
        let xs: Vec<_> = states.iter().map(|s| s.inner).collect();
        let ps: Vec<_> = povms.into_iter().map(|p| p.inner).collect();
        harness::behavior_from_quantum(&xs, &ps)
            .map(|inner| Self { inner })
            .map_err(to_py_err)
    }

    /// `snubcube` or `thomson11`.
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        let s = Scenario::preset(name).map_err(to_py_err)?;
        s.behavior().map(|inner| Self { inner }).map_err(to_py_err)
    }

    #[staticmethod]
    fn from_dict(py: Python<'_>, value: &Bound<'_, PyAny>) -> PyResult<Self> {
        Ok(Self {
            inner: from_python(py, value)?,
        })
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_python(py, &self.inner)
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        self.inner.table().shape()
    }

    fn get(&self, b: usize, x: usize, y: usize) -> PyResult<f64> {
        let (ia, ib, ob) = self.inner.table().shape();
        if b >= ob || x >= ia || y >= ib {
            return Err(PyValueError::new_err(format!(
                "index ({b}, {x}, {y}) outside {:?}",
                (ia, ib, ob)
            )));
        }
        Ok(self.inner.get(b, x, y))
    }
}

/// Monte Carlo run of the prepare-and-measure protocol; `variant` is `two-bit` or `interactive`.
#[pyfunction]
#[pyo3(signature = (state, povm, rounds = 1_000_000, seed = DEFAULT_SEED, variant = "two-bit"))]
fn simulate_pm<'py>(
    py: Python<'py>,
    state: &BlochVector,
    povm: &Povm,
    rounds: u64,
    seed: u64,
    variant: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let v = match variant {
        "two-bit" => PmVariant::TwoBit,
        "interactive" => PmVariant::Interactive,
        other => return Err(PyValueError::new_err(format!("unknown variant '{other}'"))),
    };
    let (x, p) = (state.inner, povm.inner.clone());
    let report = py
        .detach(move || harness::estimate_pm(&x, &p, rounds, seed, v))
        .map_err(to_py_err)?;
    to_python(py, &report)
}

#[pyfunction]
#[pyo3(signature = (alice, bob, rounds = 1_000_000, seed = DEFAULT_SEED))]
fn simulate_singlet<'py>(
    py: Python<'py>,
    alice: &BlochVector,
    bob: &Povm,
    rounds: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let (x, p) = (alice.inner, bob.inner.clone());
    let report = py
        .detach(move || harness::estimate_singlet(&x, &p, rounds, seed))
        .map_err(to_py_err)?;
    to_python(py, &report)
}

/// Critical visibility; returns `eta_star`, `unbounded`, `duality_gap` and the dual `witness`.
#[pyfunction]
fn visibility<'py>(py: Python<'py>, behavior: &Behavior, d_c: usize) -> PyResult<Bound<'py, PyAny>> {
    let b = behavior.inner.clone();
    let r = py
        .detach(move || witness::visibility_primal(&b, d_c, &DenseRevisedSimplex::new()))
        .map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("eta_star", r.eta_star)?;
    out.set_item("unbounded", r.unbounded)?;
    out.set_item("simulable", r.is_simulable())?;
    out.set_item("duality_gap", r.duality_gap())?;
    match r.witness() {
        Some(w) => out.set_item("witness", to_python(py, &w)?)?,
        None => out.set_item("witness", py.None())?,
    }
    Ok(out.into_any())
}

/// `max Σγp` over classical behaviors with a `d_c`-level message; `gamma[x][y][b]`.
#[pyfunction]
fn classical_bound(py: Python<'_>, gamma: Vec<Vec<Vec<f64>>>, d_c: usize) -> PyResult<f64> {
    let g = Table3::from_nested(gamma).map_err(to_py_err)?;
    py.detach(move || witness::classical_bound(&g, d_c)).map_err(to_py_err)
}

/// Exact certificate for a preset scenario and a witness dictionary.
#[pyfunction]
#[pyo3(signature = (preset, witness, denominator = exact::DEFAULT_DENOMINATOR))]
fn certify<'py>(
    py: Python<'py>,
    preset: &str,
    witness: &Bound<'py, PyAny>,
    denominator: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let w: witness::Witness = from_python(py, witness)?;
    let s = Scenario::preset(preset).map_err(to_py_err)?;
    let cert = py
        .detach(move || exact::certify(&s.state_matrices(), &s.povm_matrices(), &w, denominator))
        .map_err(to_py_err)?;
    let json = cert.to_json().map_err(to_py_err)?;
    py.import("json")?.call_method1("loads", (json,))
}

/// Re-verifies a certificate from its JSON text; returns the margin as a decimal string.
#[pyfunction]
fn replay_certificate(py: Python<'_>, text: &str) -> PyResult<String> {
    let text = text.to_owned();
    let cert = py.detach(move || exact::replay_certificate(&text)).map_err(to_py_err)?;
    Ok(exact::to_decimal(&cert.margin, 20))
}

#[pyfunction]
fn octahedron() -> Vec<[f64; 3]> {
    directions(&geometry::octahedron())
}

#[pyfunction]
fn snub_cube() -> Vec<[f64; 3]> {
    directions(&geometry::snub_cube())
}

#[pyfunction]
#[pyo3(signature = (n, restarts = 20, seed = DEFAULT_SEED))]
fn thomson(py: Python<'_>, n: usize, restarts: usize, seed: u64) -> PyResult<Vec<[f64; 3]>> {
    let t = py
        .detach(move || geometry::thomson(n, restarts, seed))
        .map_err(to_py_err)?;
    Ok(directions(&t.set))
}

#[pymodule]
#[pyo3(name = "qsimcost")]
fn qsimcost_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<BlochVector>()?;
    m.add_class::<Povm>()?;
    m.add_class::<Behavior>()?;
    m.add_function(wrap_pyfunction!(simulate_pm, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_singlet, m)?)?;
    m.add_function(wrap_pyfunction!(visibility, m)?)?;
    m.add_function(wrap_pyfunction!(classical_bound, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(replay_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(octahedron, m)?)?;
    m.add_function(wrap_pyfunction!(snub_cube, m)?)?;
    m.add_function(wrap_pyfunction!(thomson, m)?)?;
    m.add("DEFAULT_SEED", DEFAULT_SEED)?;
    Ok(())
}
