use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;
use serde_json::Value;

use syncflow::graph::{cycle_basis, BasisKind};
use syncflow::io::{case30, network_from_json, network_to_json, parse_matpower};
use syncflow::solver::DEFAULT_ENUMERATION_CAP;

fn err(e: syncflow::Error) -> PyErr {
    match e {
        syncflow::Error::Numeric(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn value_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(a) => {
            let list = PyList::empty(py);
            for x in a {
                list.append(value_to_py(py, x)?)?;
            }
            list.into_any()
        }
        Value::Object(o) => {
            let dict = PyDict::new(py);
            for (k, x) in o {
                dict.set_item(k, value_to_py(py, x)?)?;
            }
            dict.into_any()
        }
    })
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    value_to_py(py, &v)
}

fn basis_kind(s: &str) -> PyResult<BasisKind> {
    s.parse().map_err(|e: String| PyValueError::new_err(e))
}

/// Connected, balanced network with line capacities and nodal injections.
#[pyclass(name = "Network", frozen, skip_from_py_object)]
struct PyNetwork {
    inner: syncflow::Network,
}

#[pymethods]
impl PyNetwork {
    #[new]
    #[pyo3(signature = (edges, injections, labels=None))]
    fn new(
        edges: Vec<(usize, usize, f64)>,
        injections: Vec<f64>,
        labels: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let inner = match labels {
            None => syncflow::Network::unlabeled(&edges, injections),
            Some(labels) => syncflow::Network::new(
                labels,
                edges
                    .iter()
                    .map(|&(t, h, k)| syncflow::Edge::new(t, h, k))
                    .collect(),
                injections,
            ),
        }
        .map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: network_from_json(text).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (text, pf=1.0))]
    fn from_matpower(text: &str, pf: f64) -> PyResult<Self> {
        let case = parse_matpower(text).map_err(err)?;
        Ok(Self {
            inner: case.to_network(pf).map_err(err)?,
        })
    }

    /// The bundled 30-bus case with injections scaled by `pf`.
    #[staticmethod]
    #[pyo3(signature = (pf=1.0))]
    fn case30(pf: f64) -> PyResult<Self> {
        Ok(Self {
            inner: case30().to_network(pf).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (n, coupling, injections=None))]
    fn ring(n: usize, coupling: f64, injections: Option<Vec<f64>>) -> PyResult<Self> {
        let p = injections.unwrap_or_else(|| vec![0.0; n]);
        Ok(Self {
            inner: syncflow::Network::ring(n, coupling, p).map_err(err)?,
        })
    }

    fn to_json(&self) -> String {
        network_to_json(&self.inner)
    }

    fn with_injections(&self, injections: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_injections(injections).map_err(err)?,
        })
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    #[getter]
    fn cycle_rank(&self) -> usize {
        self.inner.cycle_rank()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.inner
            .edges()
            .iter()
            .map(|e| (e.tail, e.head, e.coupling))
            .collect()
    }

    #[getter]
    fn injections(&self) -> Vec<f64> {
        self.inner.injections().to_vec()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(nodes={}, edges={})",
            self.inner.node_count(),
            self.inner.edge_count()
        )
    }
}

/// Linear (DC) flow as a dict with `phases` and `flows`.
#[pyfunction]
fn solve_linear<'py>(py: Python<'py>, net: &PyNetwork) -> PyResult<Bound<'py, PyAny>> {
    to_py(
        py,
        &syncflow::linear::solve_linear(&net.inner).map_err(err)?,
    )
}

/// State with winding vector zero.
#[pyfunction]
fn solve_base<'py>(py: Python<'py>, net: &PyNetwork) -> PyResult<Bound<'py, PyAny>> {
    let out = py
        .detach(|| syncflow::solver::solve_base(&net.inner))
        .map_err(err)?;
    to_py(py, &out)
}

/// Outcome of every admissible winding vector.
#[pyfunction]
#[pyo3(signature = (net, basis="fundamental", cap=DEFAULT_ENUMERATION_CAP))]
fn find_all_normal_states<'py>(
    py: Python<'py>,
    net: &PyNetwork,
    basis: &str,
    cap: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let kind = basis_kind(basis)?;
    let states = py
        .detach(|| {
            let cb = cycle_basis(&net.inner, kind);
            syncflow::solver::find_all_normal_states(&net.inner, &cb, cap)
        })
        .map_err(err)?;
    #[derive(Serialize)]
    struct State<'a> {
        winding: &'a [i64],
        #[serde(flatten)]
        outcome: &'a syncflow::solver::SolveOutcome,
    }
    let list: Vec<State> = states
        .outcomes
        .iter()
        .map(|(z, o)| State {
            winding: z.as_slice(),
            outcome: o,
        })
        .collect();
    to_py(py, &list)
}

/// One Newton step from the linear flow towards the nonlinear flow.
#[pyfunction]
#[pyo3(signature = (net, basis="minimal"))]
fn improved_approximation(net: &PyNetwork, basis: &str) -> PyResult<Vec<f64>> {
    let cb = cycle_basis(&net.inner, basis_kind(basis)?);
    let lin = syncflow::linear::solve_linear(&net.inner).map_err(err)?;
    syncflow::approx::improved_approximation(&net.inner, &cb, &lin.flows).map_err(err)
}

/// Bounds on the K-norm error of the linear flow.
#[pyfunction]
fn error_bounds<'py>(py: Python<'py>, net: &PyNetwork) -> PyResult<Bound<'py, PyAny>> {
    let lin = syncflow::linear::solve_linear(&net.inner).map_err(err)?;
    to_py(
        py,
        &syncflow::approx::error_bounds(&net.inner, &lin.flows).map_err(err)?,
    )
}

#[pyfunction]
fn max_flow_feasible<'py>(py: Python<'py>, net: &PyNetwork) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &syncflow::feasibility::max_flow_feasible(&net.inner))
}

#[pyfunction]
fn resistance_distance(net: &PyNetwork, edge: usize) -> PyResult<f64> {
    syncflow::graph::resistance_distance(&net.inner, edge).map_err(err)
}

#[pymodule]
fn _syncflow(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(solve_linear, m)?)?;
    m.add_function(wrap_pyfunction!(solve_base, m)?)?;
    m.add_function(wrap_pyfunction!(find_all_normal_states, m)?)?;
    m.add_function(wrap_pyfunction!(improved_approximation, m)?)?;
    m.add_function(wrap_pyfunction!(error_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(max_flow_feasible, m)?)?;
    m.add_function(wrap_pyfunction!(resistance_distance, m)?)?;
    Ok(())
}
