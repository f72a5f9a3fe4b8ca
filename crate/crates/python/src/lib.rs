use std::path::Path;

use noncollapse::checks;
use noncollapse::dcrpuzz::{
    col_exact, dcr_advantage, dcr_advantage_empirical, ColAdversary, CollisionAdversary,
    DcrScheme, Duplicated, OraclePipeline,
};
use noncollapse::ncmo::{oracle_exact, oracle_sample};
use noncollapse::primitives::{
    com_break_via_collision, com_to_dcrpuzz, mac_break_via_collision, mac_to_dcrpuzz,
    mac_to_dcrpuzz_circuit, pair_parity_success, ComVariant, OneShotMac, ToyCommitment,
};
use noncollapse::puzzles::{hybrid_report as report_for, make_adversary, AdvContext, AdversaryKind};
use noncollapse::qsim::{bell_circuit, Circuit};
use noncollapse::{BitString, EmpiricalDist, Error, FiniteDist, SimRng};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList, PyString};
use rand::SeedableRng;
use serde::Serialize;
use serde_json::Value;

create_exception!(noncollapse, NoncollapseError, PyException);
create_exception!(noncollapse, InputError, NoncollapseError);
create_exception!(noncollapse, InstanceTooLargeError, NoncollapseError);
create_exception!(noncollapse, RuntimeFailure, NoncollapseError);

fn err(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Structural(_) | Error::Parse(_) => InputError::new_err(msg),
        Error::InstanceTooLarge { .. } | Error::RetryBudgetExhausted { .. } => {
            InstanceTooLargeError::new_err(msg)
        }
        Error::ImpossibleCondition(_) | Error::Protocol(_) => RuntimeFailure::new_err(msg),
    }
}

fn value_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => PyString::new(py, s).into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(value_to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, value_to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn to_py<'py, T: Serialize>(py: Python<'py>, x: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(x).map_err(|e| NoncollapseError::new_err(e.to_string()))?;
    value_to_py(py, &v)
}

fn law_dict<'py>(py: Python<'py>, d: &FiniteDist) -> PyResult<Bound<'py, PyDict>> {
    let dict = PyDict::new(py);
    for (s, p) in d.iter() {
        dict.set_item(s.to_string(), p)?;
    }
    Ok(dict)
}

fn dict_law(d: &Bound<'_, PyDict>) -> PyResult<FiniteDist> {
    let mut entries = Vec::new();
    for (k, v) in d.iter() {
        let s: BitString = k.extract::<String>()?.parse().map_err(err)?;
        entries.push((s, v.extract::<f64>()?));
    }
    let len = entries
        .first()
        .map(|(s, _)| s.len())
        .ok_or_else(|| InputError::new_err("empty distribution"))?;
    FiniteDist::new(len, entries).map_err(err)
}

fn collision_source(name: &str) -> PyResult<&'static dyn CollisionAdversary> {
    match name {
        "col" => Ok(&ColAdversary),
        "oracle" => Ok(&OraclePipeline),
        "duplicated" => Ok(&Duplicated),
        other => Err(InputError::new_err(format!("unknown collision source {other:?}"))),
    }
}

/// A measured circuit: a list of steps, each a gate list followed by a
/// measurement of a prefix of the register.
#[pyclass(name = "Circuit", frozen)]
struct PyCircuit {
    inner: Circuit,
}

#[pymethods]
impl PyCircuit {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyCircuit {
            inner: Circuit::from_json_str(text).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (m1, m2=None))]
    fn bell(m1: usize, m2: Option<usize>) -> Self {
        PyCircuit {
            inner: bell_circuit(m1, m2),
        }
    }

    #[getter]
    fn qubits(&self) -> usize {
        self.inner.qubits()
    }

    #[getter]
    fn measures(&self) -> Vec<usize> {
        self.inner.measures()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner.to_json()).map_err(|e| NoncollapseError::new_err(e.to_string()))
    }

    /// Exact law of the concatenated reads `v_1 ‖ … ‖ v_T`.
    fn oracle_exact<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        law_dict(py, &oracle_exact(&self.inner).map_err(err)?)
    }

    /// Counts of `shots` independent oracle runs.
    fn oracle_sample<'py>(&self, py: Python<'py>, shots: u64, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let mut rng = SimRng::seed_from_u64(seed);
        let mut emp = EmpiricalDist::new(self.inner.len() * self.inner.qubits());
        for _ in 0..shots {
            emp.record(oracle_sample(&self.inner, &mut rng).map_err(err)?.concat())
                .map_err(err)?;
        }
        let dict = PyDict::new(py);
        for (s, n) in emp.counts() {
            dict.set_item(s.to_string(), n)?;
        }
        Ok(dict)
    }

    fn __repr__(&self) -> String {
        format!(
            "Circuit(qubits={}, measures={:?})",
            self.inner.qubits(),
            self.inner.measures()
        )
    }
}

/// A distributional collision-resistant puzzle given by its setup law and
/// puzzle sampler.
#[pyclass(name = "DcrScheme", frozen)]
struct PyDcrScheme {
    inner: DcrScheme,
}

#[pymethods]
impl PyDcrScheme {
    #[staticmethod]
    #[pyo3(signature = (text, base=None))]
    fn from_json(text: &str, base: Option<&str>) -> PyResult<Self> {
        Ok(PyDcrScheme {
            inner: DcrScheme::from_json_str(text, base.map(Path::new)).map_err(err)?,
        })
    }

    #[getter]
    fn pp_len(&self) -> usize {
        self.inner.pp_len
    }

    #[getter]
    fn puzz_len(&self) -> usize {
        self.inner.puzz_len
    }

    #[getter]
    fn ans_len(&self) -> usize {
        self.inner.ans_len
    }

    #[pyo3(signature = (pp=""))]
    fn samp<'py>(&self, py: Python<'py>, pp: &str) -> PyResult<Bound<'py, PyDict>> {
        let pp: BitString = pp.parse().map_err(err)?;
        law_dict(py, &self.inner.samp_law(&pp).map_err(err)?)
    }

    /// Exact `Col` law of `puzz ‖ ans ‖ ans'` for public parameters `pp`.
    #[pyo3(signature = (pp=""))]
    fn col<'py>(&self, py: Python<'py>, pp: &str) -> PyResult<Bound<'py, PyDict>> {
        let pp: BitString = pp.parse().map_err(err)?;
        law_dict(py, &col_exact(&self.inner, &pp).map_err(err)?)
    }

    #[pyo3(signature = (source="col"))]
    fn advantage(&self, source: &str) -> PyResult<f64> {
        dcr_advantage(&self.inner, collision_source(source)?).map_err(err)
    }

    fn advantage_empirical(&self, source: &str, shots: u64, seed: u64) -> PyResult<f64> {
        let mut rng = SimRng::seed_from_u64(seed);
        dcr_advantage_empirical(&self.inner, collision_source(source)?, shots, &mut rng).map_err(err)
    }
}

#[pyfunction]
fn sd(p: &Bound<'_, PyDict>, q: &Bound<'_, PyDict>) -> PyResult<f64> {
    dict_law(p)?.sd(&dict_law(q)?).map_err(err)
}

/// Hybrid figures for one instance and adversary
/// (`perfect`, `oblivious` or `rejection:<budget>`).
#[pyfunction]
#[pyo3(signature = (circuit, adversary="perfect", x=""))]
fn hybrid_report<'py>(
    py: Python<'py>,
    circuit: &PyCircuit,
    adversary: &str,
    x: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let kind: AdversaryKind = adversary.parse().map_err(err)?;
    let x: BitString = x.parse().map_err(err)?;
    let ctx = AdvContext::new(x, circuit.inner.clone()).map_err(err)?;
    let adv = make_adversary(&kind).map_err(err)?;
    to_py(py, &report_for(&ctx, adv.as_ref()).map_err(err)?)
}

/// Forgery game against the toy one-shot MAC, driven by a collision source.
#[pyfunction]
#[pyo3(signature = (n=4, lm=4, trials=0, seed=0, source="col"))]
fn mac_break<'py>(
    py: Python<'py>,
    n: usize,
    lm: usize,
    trials: u64,
    seed: u64,
    source: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let mut rng = SimRng::seed_from_u64(seed);
    let mac = OneShotMac::toy(n, lm, &mut rng).map_err(err)?;
    let scheme = if source == "oracle" {
        mac_to_dcrpuzz_circuit(&mac)
    } else {
        mac_to_dcrpuzz(&mac)
    }
    .map_err(err)?;
    let game = mac_break_via_collision(&mac, &scheme, collision_source(source)?, trials, &mut rng)
        .map_err(err)?;
    to_py(py, &game)
}

/// Binding game against the toy commitment. Returns the game report and the
/// enumerated pair-parity success.
#[pyfunction]
#[pyo3(signature = (n=3, c=1, variant="coherent", trials=0, seed=0, source="col"))]
fn commitment_break<'py>(
    py: Python<'py>,
    n: usize,
    c: usize,
    variant: &str,
    trials: u64,
    seed: u64,
    source: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let mut rng = SimRng::seed_from_u64(seed);
    let variant: ComVariant = variant.parse().map_err(err)?;
    let com = ToyCommitment::toy(n, c, &mut rng).map_err(err)?;
    let scheme = com_to_dcrpuzz(&com, variant).map_err(err)?;
    let game = com_break_via_collision(&com, &scheme, collision_source(source)?, trials, &mut rng)
        .map_err(err)?;
    let out = to_py(py, &game)?;
    out.set_item("pair_parity_success", pair_parity_success(&com))?;
    Ok(out)
}

/// Runs a named check suite and returns one report per criterion.
#[pyfunction]
#[pyo3(signature = (name, seed=checks::DEFAULT_SEED))]
fn run_suite<'py>(py: Python<'py>, name: &str, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let reports = py.detach(|| checks::run_suite(name, seed)).map_err(err)?;
    let out = to_py(py, &reports)?;
    for (item, r) in out.try_iter()?.zip(&reports) {
        item?.set_item("pass", r.pass())?;
    }
    Ok(out)
}

#[pymodule]
#[pyo3(name = "noncollapse")]
fn noncollapse_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("NoncollapseError", py.get_type::<NoncollapseError>())?;
    m.add("InputError", py.get_type::<InputError>())?;
    m.add("InstanceTooLargeError", py.get_type::<InstanceTooLargeError>())?;
    m.add("RuntimeFailure", py.get_type::<RuntimeFailure>())?;
    m.add("SUITES", checks::SUITES.to_vec())?;
    m.add_class::<PyCircuit>()?;
    m.add_class::<PyDcrScheme>()?;
    m.add_function(wrap_pyfunction!(sd, m)?)?;
    m.add_function(wrap_pyfunction!(hybrid_report, m)?)?;
    m.add_function(wrap_pyfunction!(mac_break, m)?)?;
    m.add_function(wrap_pyfunction!(commitment_break, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    Ok(())
}
