//! Python bindings: parse an order book, clear it, check a solution.

use std::collections::BTreeMap;
use std::time::Duration;

use dayahead::driver::{clear_exact, clear_heuristic, ClearingOptions, ClearingResult};
use dayahead::io::{parse_instance, parse_solution, write_instance, write_json, write_solution, SolutionDocument};
use dayahead::model::Instance;
use dayahead::verify::{oracle_clear, verify_solution, ORACLE_CAP};
use dayahead::Error;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;

create_exception!(pydayahead, DayaheadError, PyException);
create_exception!(pydayahead, InfeasibleError, DayaheadError);
create_exception!(pydayahead, InputError, DayaheadError);
create_exception!(pydayahead, NumericalError, DayaheadError);
create_exception!(pydayahead, TooLargeError, DayaheadError);

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Infeasible(_) => InfeasibleError::new_err(msg),
        Error::Numerical(_) => NumericalError::new_err(msg),
        Error::TooLarge { .. } => TooLargeError::new_err(msg),
        _ => InputError::new_err(msg),
    }
}

/// A validated order book.
#[pyclass(name = "Instance", frozen, module = "pydayahead")]
struct PyInstance {
    inner: Instance,
}

#[pymethods]
impl PyInstance {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        parse_instance(text).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| InputError::new_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn to_json(&self) -> String {
        write_instance(&self.inner)
    }

    #[getter]
    fn hours(&self) -> usize {
        self.inner.hours
    }

    #[getter]
    fn areas(&self) -> Vec<String> {
        self.inner.areas.iter().map(|a| a.id.clone()).collect()
    }

    #[getter]
    fn blocks(&self) -> Vec<String> {
        self.inner.blocks.iter().map(|b| b.id.clone()).collect()
    }

    #[getter]
    fn flex(&self) -> Vec<String> {
        self.inner.flex.iter().map(|f| f.id.clone()).collect()
    }

    #[getter]
    fn interconnectors(&self) -> Vec<String> {
        self.inner.interconnectors.iter().map(|c| c.id.clone()).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(areas={}, hours={}, blocks={}, flex={})",
            self.inner.areas.len(),
            self.inner.hours,
            self.inner.blocks.len(),
            self.inner.flex.len()
        )
    }
}

/// Outcome of `clear` or `oracle`. Holds the same data as the JSON solution document.
#[pyclass(name = "Clearing", frozen, module = "pydayahead")]
struct PyClearing {
    doc: SolutionDocument,
}

impl PyClearing {
    fn new(instance: &Instance, result: &ClearingResult) -> Self {
        Self {
            doc: SolutionDocument::from_result(instance, result),
        }
    }
}

#[pymethods]
impl PyClearing {
    #[getter]
    fn mode(&self) -> Option<String> {
        self.doc.mode.map(|m| enum_name(&m))
    }

    #[getter]
    fn status(&self) -> Option<String> {
        self.doc.status.map(|s| enum_name(&s))
    }

    #[getter]
    fn welfare(&self) -> Option<f64> {
        self.doc.welfare
    }

    #[getter]
    fn bound(&self) -> Option<f64> {
        self.doc.bound
    }

    #[getter]
    fn gap(&self) -> Option<f64> {
        self.doc.gap
    }

    /// Area id to hourly prices.
    #[getter]
    fn prices(&self) -> BTreeMap<String, Vec<f64>> {
        self.doc.prices.iter().map(|s| (s.id.clone(), s.values.clone())).collect()
    }

    /// Interconnector id to hourly flows.
    #[getter]
    fn flows(&self) -> BTreeMap<String, Vec<f64>> {
        self.doc.flows.iter().map(|s| (s.id.clone(), s.values.clone())).collect()
    }

    #[getter]
    fn accepted_blocks(&self) -> Vec<String> {
        self.doc.selection.blocks.clone()
    }

    /// `(flex id, hour)` for every executed flex bid.
    #[getter]
    fn executed_flex(&self) -> Vec<(String, usize)> {
        self.doc.selection.flex.iter().map(|f| (f.id.clone(), f.hour)).collect()
    }

    /// Paradoxically rejected bids as `(id, hour)`, hour set for flex bids only.
    #[getter]
    fn rejected_in_the_money(&self) -> Vec<(String, Option<usize>)> {
        self.doc.prbs.iter().map(|p| (p.id.clone(), p.hour)).collect()
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.doc.iterations.len()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.doc.warnings.clone()
    }

    fn to_json(&self) -> String {
        write_solution(&self.doc)
    }

    fn __repr__(&self) -> String {
        let status = self.status().unwrap_or_else(|| "none".into());
        let welfare = self.doc.welfare.map_or("None".into(), |w| w.to_string());
        format!(
            "Clearing(status='{status}', welfare={welfare}, blocks={:?})",
            self.doc.selection.blocks
        )
    }
}

fn enum_name<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(str::to_owned))
        .unwrap_or_default()
}

#[pyfunction]
#[pyo3(signature = (instance, mode = "exact", time_limit = None, abs_gap = 1e-9))]
fn clear(py: Python<'_>, instance: &PyInstance, mode: &str, time_limit: Option<f64>, abs_gap: f64) -> PyResult<PyClearing> {
    let time_limit = match time_limit {
        Some(s) if s.is_finite() && s >= 0.0 => Some(Duration::from_secs_f64(s)),
        Some(s) => return Err(PyValueError::new_err(format!("invalid time limit {s}"))),
        None => None,
    };
    let options = ClearingOptions {
        abs_gap,
        time_limit,
        ..ClearingOptions::default()
    };
    let run = match mode {
        "exact" => clear_exact,
        "heuristic" => clear_heuristic,
        other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    };
    let inst = &instance.inner;
    let result = py.detach(|| run(inst, &options)).map_err(to_py)?;
    Ok(PyClearing::new(inst, &result))
}

#[pyfunction]
#[pyo3(signature = (instance, cap = ORACLE_CAP))]
fn oracle(py: Python<'_>, instance: &PyInstance, cap: usize) -> PyResult<PyClearing> {
    let inst = &instance.inner;
    let res = py.detach(|| oracle_clear(inst, cap)).map_err(to_py)?;
    Ok(PyClearing::new(inst, &res.result))
}

/// Checks a solution document (JSON text or a `Clearing`) and returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (instance, solution, tol = 1e-6))]
fn verify<'py>(py: Python<'py>, instance: &PyInstance, solution: &Bound<'py, PyAny>, tol: f64) -> PyResult<Bound<'py, PyAny>> {
    let doc = if let Ok(c) = solution.cast::<PyClearing>() {
        c.get().doc.clone()
    } else {
        parse_solution(&solution.extract::<String>()?).map_err(to_py)?
    };
    let (sol, prices) = doc.to_parts(&instance.inner).map_err(to_py)?;
    let report = verify_solution(&instance.inner, &sol, &prices, tol).map_err(to_py)?;
    py.import("json")?.call_method1("loads", (write_json(&report),))
}

#[pymodule]
fn pydayahead(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add_class::<PyInstance>()?;
    m.add_class::<PyClearing>()?;
    m.add_function(wrap_pyfunction!(clear, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("DayaheadError", py.get_type::<DayaheadError>())?;
    m.add("InfeasibleError", py.get_type::<InfeasibleError>())?;
    m.add("InputError", py.get_type::<InputError>())?;
    m.add("NumericalError", py.get_type::<NumericalError>())?;
    m.add("TooLargeError", py.get_type::<TooLargeError>())?;
    m.add("ORACLE_CAP", ORACLE_CAP)?;
    Ok(())
}
