//! Python module `mwi`: bipartite states, branch trees, the frequency
//! operator and the scenario engines. Structured results come back as plain
//! dicts and lists.

use std::cell::RefCell;

use mwi_core::anthropic::{
    self, BranchCountConfig, CoincidenceConfig, EvolutionConfig, LifeLedger, ZenoChainConfig, ZenoMode,
};
use mwi_core::branching::BranchTree;
use mwi_core::fhg::{self, FrequencySpec};
use mwi_core::schmidt::{BipartiteState, Side};
use mwi_core::{Complex, Error};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList, PyString};
use serde::Serialize;
use serde_json::Value;

fn py_err(e: Error) -> PyErr {
    if e.is_numeric() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                u.into_pyobject(py)?.into_any()
            } else if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any()
            }
        }
        Value::String(s) => PyString::new(py, s).into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for x in items {
                list.append(json_to_py(py, x)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, x) in map {
                dict.set_item(k, json_to_py(py, x)?)?;
            }
            dict.into_any()
        }
    })
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let value = serde_json::to_value(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    json_to_py(py, &value)
}

fn parse_side(side: &str) -> PyResult<Side> {
    match side {
        "first" | "I" | "1" => Ok(Side::First),
        "second" | "II" | "2" => Ok(Side::Second),
        other => Err(PyValueError::new_err(format!("side must be \"first\" or \"second\", got {other:?}"))),
    }
}

/// Pure state of a d1 × d2 system, stored as its coefficient matrix.
#[pyclass(name = "BipartiteState", module = "mwi")]
struct PyBipartiteState {
    inner: BipartiteState,
}

#[pymethods]
impl PyBipartiteState {
    /// Row-major amplitudes (normalised on construction).
    #[new]
    fn new(amplitudes: Vec<Complex>, d1: usize, d2: usize) -> PyResult<Self> {
        let inner = BipartiteState::from_vector(&amplitudes, d1, d2).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn bell() -> Self {
        Self {
            inner: BipartiteState::bell(),
        }
    }

    #[staticmethod]
    fn product(a: Vec<Complex>, b: Vec<Complex>) -> PyResult<Self> {
        let inner = BipartiteState::product(&a, &b).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn d1(&self) -> usize {
        self.inner.d1()
    }

    #[getter]
    fn d2(&self) -> usize {
        self.inner.d2()
    }

    fn amplitudes(&self) -> Vec<Complex> {
        self.inner.amplitudes().to_vec()
    }

    /// Dict with `lambdas` (descending), `rank` and `entropy`.
    fn schmidt<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = self.inner.schmidt().map_err(py_err)?;
        let out = PyDict::new(py);
        out.set_item("entropy", d.entropy())?;
        out.set_item("rank", d.rank)?;
        out.set_item("lambdas", d.lambdas)?;
        Ok(out)
    }

    fn entanglement_entropy(&self) -> PyResult<f64> {
        self.inner.entanglement_entropy().map_err(py_err)
    }

    #[pyo3(signature = (side = "first"))]
    fn reduced_spectrum(&self, side: &str) -> PyResult<Vec<f64>> {
        self.inner.reduced_density(parse_side(side)?).spectrum().map_err(py_err)
    }

    #[pyo3(signature = (side = "first"))]
    fn purity(&self, side: &str) -> PyResult<f64> {
        Ok(self.inner.reduced_density(parse_side(side)?).purity())
    }

    #[pyo3(signature = (tol = 1e-10))]
    fn is_factorized(&self, tol: f64) -> PyResult<bool> {
        self.inner.is_factorized(tol).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("BipartiteState(d1={}, d2={})", self.inner.d1(), self.inner.d2())
    }
}

/// Tree of branches; each split records Born weights on the children.
#[pyclass(name = "BranchTree", module = "mwi")]
struct PyBranchTree {
    inner: BranchTree,
}

impl PyBranchTree {
    /// Evaluates a Python predicate on every leaf path, surfacing the first
    /// exception raised by it.
    fn with_predicate<R>(
        &self,
        predicate: &Bound<'_, PyAny>,
        f: impl FnOnce(&BranchTree, &dyn Fn(&[usize]) -> bool) -> R,
    ) -> PyResult<R> {
        let failure: RefCell<Option<PyErr>> = RefCell::new(None);
        let test = |path: &[usize]| -> bool {
            if failure.borrow().is_some() {
                return false;
            }
            match predicate.call1((path.to_vec(),)).and_then(|r| r.is_truthy()) {
                Ok(b) => b,
                Err(e) => {
                    *failure.borrow_mut() = Some(e);
                    false
                }
            }
        };
        let out = f(&self.inner, &test);
        match failure.into_inner() {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }
}

#[pymethods]
impl PyBranchTree {
    #[new]
    #[pyo3(signature = (max_leaves = None))]
    fn new(max_leaves: Option<usize>) -> Self {
        let inner = match max_leaves {
            Some(n) => BranchTree::with_max_leaves(n),
            None => BranchTree::new(),
        };
        Self { inner }
    }

    /// Splits every current leaf with the same weights.
    fn split_all(&mut self, weights: Vec<f64>) -> PyResult<()> {
        self.inner.split_all(&weights).map_err(py_err)
    }

    #[getter]
    fn leaf_count(&self) -> usize {
        self.inner.leaf_count()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.nodes().len()
    }

    /// Born mass of the leaves whose outcome path satisfies `predicate`.
    fn born_measure(&self, predicate: &Bound<'_, PyAny>) -> PyResult<f64> {
        self.with_predicate(predicate, |tree, test| tree.born_measure(test))
    }

    /// Fraction of leaves whose outcome path satisfies `predicate`.
    fn count_measure(&self, predicate: &Bound<'_, PyAny>) -> PyResult<f64> {
        self.with_predicate(predicate, |tree, test| tree.count_measure(test))?
            .map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.to_json()).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
}

/// ‖(F − p_k)|ψ⟩^⊗N‖² by enumerating outcome strings.
#[pyfunction]
#[pyo3(signature = (amplitudes, copies, outcome = 0))]
fn freq_deviation_explicit(amplitudes: Vec<Complex>, copies: u64, outcome: usize) -> PyResult<f64> {
    let spec = FrequencySpec::new(amplitudes, copies, outcome).map_err(py_err)?;
    fhg::freq_deviation_explicit(&spec).map_err(py_err)
}

/// The same quantity summed over binomial count classes.
#[pyfunction]
#[pyo3(signature = (amplitudes, copies, outcome = 0))]
fn freq_deviation_multinomial(amplitudes: Vec<Complex>, copies: u64, outcome: usize) -> PyResult<f64> {
    let spec = FrequencySpec::new(amplitudes, copies, outcome).map_err(py_err)?;
    fhg::freq_deviation_multinomial(&spec).map_err(py_err)
}

#[pyfunction]
fn freq_deviation_closed(p_k: f64, copies: u64) -> f64 {
    fhg::freq_deviation_closed(p_k, copies)
}

/// Rows `{m, branch_count, count_mass, born_mass}` for m = 0..=trials.
#[pyfunction]
fn graham_table<'py>(py: Python<'py>, p: f64, trials: u32) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &fhg::graham_table(p, trials).map_err(py_err)?)
}

#[pyfunction]
#[pyo3(signature = (dim, samples, seed, streams = 1))]
fn haar_fidelity_mean<'py>(py: Python<'py>, dim: usize, samples: u64, seed: u64, streams: u64) -> PyResult<Bound<'py, PyAny>> {
    let est = py.detach(|| anthropic::haar_fidelity_mean(dim, samples, seed, streams)).map_err(py_err)?;
    to_py(py, &est)
}

#[pyfunction]
fn zeno_polarizer_chain(intermediates: u32) -> f64 {
    anthropic::zeno_polarizer_chain(intermediates)
}

#[pyfunction]
fn zeno_polarizer_simulation(intermediates: u32) -> f64 {
    anthropic::zeno_polarizer_simulation(intermediates)
}

#[pyfunction]
#[pyo3(signature = (dim, intermediates, samples, seed, target = 1, streams = 1))]
fn zeno_random_chain<'py>(
    py: Python<'py>,
    dim: usize,
    intermediates: u32,
    samples: u64,
    seed: u64,
    target: usize,
    streams: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ZenoChainConfig {
        dim,
        intermediates,
        mode: ZenoMode::Random,
        samples,
        seed,
        target,
    };
    let est = py.detach(|| anthropic::zeno_random_chain(&cfg, streams)).map_err(py_err)?;
    to_py(py, &est)
}

#[pyfunction]
#[pyo3(signature = (dim, intermediates, target = 1))]
fn zeno_random_chain_expectation(dim: usize, intermediates: u32, target: usize) -> f64 {
    anthropic::zeno_random_chain_expectation(dim, intermediates, target)
}

#[pyfunction]
#[pyo3(signature = (steps, threshold, branches, seed, step_sigma = 1.0, reflecting = true, streams = 1))]
#[allow(clippy::too_many_arguments)]
fn evolve_complexity<'py>(
    py: Python<'py>,
    steps: u64,
    threshold: f64,
    branches: u64,
    seed: u64,
    step_sigma: f64,
    reflecting: bool,
    streams: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = EvolutionConfig {
        steps,
        step_sigma,
        threshold,
        branches,
        seed,
        reflecting,
    };
    let res = py.detach(|| anthropic::evolve_complexity(&cfg, streams)).map_err(py_err)?;
    to_py(py, &res)
}

#[pyfunction]
fn survival_probability(q: f64, branches: u64) -> PyResult<f64> {
    anthropic::survival_probability(q, branches).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (r0, drift_sigma, steps, epsilon, branches, seed, streams = 1))]
#[allow(clippy::too_many_arguments)]
fn coincidence_scan<'py>(
    py: Python<'py>,
    r0: f64,
    drift_sigma: f64,
    steps: u64,
    epsilon: f64,
    branches: u64,
    seed: u64,
    streams: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = CoincidenceConfig {
        r0,
        drift_sigma,
        steps,
        epsilon,
        branches,
        seed,
    };
    let res = py.detach(|| anthropic::coincidence_scan(&cfg, streams)).map_err(py_err)?;
    to_py(py, &res)
}

#[pyfunction]
#[pyo3(signature = (universe_age_s = 4.35e17, planck_time_s = 5.39e-44, branching_base = 2.0))]
fn branch_count_estimate<'py>(
    py: Python<'py>,
    universe_age_s: f64,
    planck_time_s: f64,
    branching_base: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = BranchCountConfig {
        universe_age_s,
        planck_time_s,
        branching_base,
    };
    to_py(py, &anthropic::branch_count_estimate(&cfg).map_err(py_err)?)
}

#[pyfunction]
fn life_ledger_verdict<'py>(
    py: Python<'py>,
    log10_event_prob: f64,
    log10_attempts: f64,
    log10_log10_branches: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let ledger = LifeLedger {
        log10_event_prob,
        log10_attempts,
        log10_log10_branches,
    };
    to_py(py, &anthropic::life_ledger_verdict(&ledger).map_err(py_err)?)
}

/// Runs a JSON scenario config and returns the rendered report text.
#[pyfunction]
fn run_config(py: Python<'_>, config: &str) -> PyResult<String> {
    let config = config.to_owned();
    py.detach(move || mwi_core::cli::run_text(&config))
        .map_err(|e| PyValueError::new_err(e.message))
}

/// Every violation in a JSON scenario config, as "path: message" strings.
#[pyfunction]
fn validate_config(config: &str) -> Vec<String> {
    mwi_core::cli::validate(config).iter().map(ToString::to_string).collect()
}

#[pymodule]
fn mwi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyBipartiteState>()?;
    m.add_class::<PyBranchTree>()?;
    m.add_function(wrap_pyfunction!(freq_deviation_explicit, m)?)?;
    m.add_function(wrap_pyfunction!(freq_deviation_multinomial, m)?)?;
    m.add_function(wrap_pyfunction!(freq_deviation_closed, m)?)?;
    m.add_function(wrap_pyfunction!(graham_table, m)?)?;
    m.add_function(wrap_pyfunction!(haar_fidelity_mean, m)?)?;
    m.add_function(wrap_pyfunction!(zeno_polarizer_chain, m)?)?;
    m.add_function(wrap_pyfunction!(zeno_polarizer_simulation, m)?)?;
    m.add_function(wrap_pyfunction!(zeno_random_chain, m)?)?;
    m.add_function(wrap_pyfunction!(zeno_random_chain_expectation, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_complexity, m)?)?;
    m.add_function(wrap_pyfunction!(survival_probability, m)?)?;
    m.add_function(wrap_pyfunction!(coincidence_scan, m)?)?;
    m.add_function(wrap_pyfunction!(branch_count_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(life_ledger_verdict, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    Ok(())
}
