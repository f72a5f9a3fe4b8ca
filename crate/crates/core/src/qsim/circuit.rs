use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gate::{euler_unitary, Gate, GateJson};
use super::state::StateVector;
use super::MAX_QUBITS;
use crate::bits::BitString;
use crate::error::{Error, Result};

/// One `(U_t, M_t)` pair: a gate list followed by a measurement of the first
/// `measure` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub gates: Vec<Gate>,
    pub measure: usize,
}

impl Step {
    pub fn new(gates: Vec<Gate>, measure: usize) -> Self {
        Step { gates, measure }
    }

    pub fn measure_only(measure: usize) -> Self {
        Step {
            gates: Vec::new(),
            measure,
        }
    }
}

/// A validated circuit on `qubits` qubits with at least one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    qubits: usize,
    steps: Vec<Step>,
}

impl Circuit {
    pub fn new(qubits: usize, steps: Vec<Step>) -> Result<Self> {
        if qubits == 0 {
            return Err(Error::structural("circuit needs at least one qubit"));
        }
        if qubits > MAX_QUBITS {
            return Err(Error::too_large("qubit count", MAX_QUBITS));
        }
        if steps.is_empty() {
            return Err(Error::structural("circuit needs at least one step"));
        }
        for (t, s) in steps.iter().enumerate() {
            if s.measure > qubits {
                return Err(Error::structural(format!(
                    "step {} measures {} of {qubits} qubits",
                    t + 1,
                    s.measure
                )));
            }
            for g in &s.gates {
                g.validate(qubits)?;
            }
        }
        Ok(Circuit { qubits, steps })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// Number of steps `T`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `m_t` for `t` in `1..=T`.
    pub fn measured(&self, t: usize) -> usize {
        self.steps[t - 1].measure
    }

    pub fn measures(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.measure).collect()
    }

    /// Total number of collapsing bits over the first `t` steps.
    pub fn measured_bits(&self, t: usize) -> usize {
        self.steps[..t].iter().map(|s| s.measure).sum()
    }

    /// Checks that `t` names a step.
    pub fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.len() {
            Err(Error::structural(format!(
                "step {t} outside 1..={}",
                self.len()
            )))
        } else {
            Ok(())
        }
    }

    /// Checks outcome lengths of a transcript prefix against the circuit.
    pub fn check_transcript(&self, tau: &Transcript) -> Result<()> {
        if tau.len() > self.len() {
            return Err(Error::structural(format!(
                "transcript of {} steps for a {}-step circuit",
                tau.len(),
                self.len()
            )));
        }
        for (i, u) in tau.outcomes().iter().enumerate() {
            if u.len() != self.steps[i].measure {
                return Err(Error::structural(format!(
                    "outcome {} has {} bits, step measures {}",
                    i + 1,
                    u.len(),
                    self.steps[i].measure
                )));
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Circuit> {
        let j: CircuitJson =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("circuit: {e}")))?;
        Circuit::try_from(&j)
    }

    pub fn to_json(&self) -> CircuitJson {
        CircuitJson::from(self)
    }
}

/// `(u_1, …, u_t)`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Transcript {
    outcomes: Vec<BitString>,
}

impl Transcript {
    pub fn new(outcomes: Vec<BitString>) -> Self {
        Transcript { outcomes }
    }

    pub fn empty() -> Self {
        Transcript::default()
    }

    pub fn outcomes(&self) -> &[BitString] {
        &self.outcomes
    }

    /// Number of steps covered.
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn push(&mut self, u: BitString) {
        self.outcomes.push(u);
    }

    pub fn prefix(&self, t: usize) -> Transcript {
        Transcript {
            outcomes: self.outcomes[..t].to_vec(),
        }
    }

    /// `u_1 ‖ … ‖ u_t`.
    pub fn concat(&self) -> Result<BitString> {
        BitString::concat_all(&self.outcomes)
    }

    /// Splits a concatenated transcript according to `measures`.
    pub fn split(bits: &BitString, measures: &[usize]) -> Result<Transcript> {
        let total: usize = measures.iter().sum();
        if total != bits.len() {
            return Err(Error::structural(format!(
                "{} transcript bits for measurements totalling {total}",
                bits.len()
            )));
        }
        let mut at = 0;
        let outcomes = measures
            .iter()
            .map(|&m| {
                let u = bits.slice(at, at + m);
                at += m;
                u
            })
            .collect();
        Ok(Transcript { outcomes })
    }
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, u) in self.outcomes.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            if u.is_empty() {
                f.write_str("ε")?;
            } else {
                write!(f, "{u}")?;
            }
        }
        f.write_str(")")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepJson {
    #[serde(default)]
    pub gates: Vec<GateJson>,
    #[serde(default)]
    pub measure: usize,
}

/// `{"qubits": ℓ, "steps": [{"gates": [...], "measure": m}, ...]}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitJson {
    pub qubits: usize,
    pub steps: Vec<StepJson>,
}

impl TryFrom<&CircuitJson> for Circuit {
    type Error = Error;

    fn try_from(j: &CircuitJson) -> Result<Circuit> {
        if j.qubits > MAX_QUBITS {
            return Err(Error::too_large("qubit count", MAX_QUBITS));
        }
        let steps = j
            .steps
            .iter()
            .map(|s| {
                Ok(Step {
                    gates: s.gates.iter().map(Gate::try_from).collect::<Result<_>>()?,
                    measure: s.measure,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Circuit::new(j.qubits, steps)
    }
}

impl From<&Circuit> for CircuitJson {
    fn from(c: &Circuit) -> CircuitJson {
        CircuitJson {
            qubits: c.qubits,
            steps: c
                .steps
                .iter()
                .map(|s| StepJson {
                    gates: s.gates.iter().map(GateJson::from).collect(),
                    measure: s.measure,
                })
                .collect(),
        }
    }
}

impl Serialize for Circuit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CircuitJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Circuit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = CircuitJson::deserialize(d)?;
        Circuit::try_from(&j).map_err(serde::de::Error::custom)
    }
}

/// Runs steps `1..=t` on `|0…0⟩`, sampling each collapsing outcome.
pub fn run_prefix<R: Rng + ?Sized>(
    c: &Circuit,
    t: usize,
    rng: &mut R,
) -> Result<(Transcript, StateVector)> {
    c.check_step(t)?;
    let mut state = StateVector::zero(c.qubits)?;
    let mut tau = Transcript::empty();
    for step in &c.steps[..t] {
        state.apply_gates_unchecked(&step.gates);
        let (u, post, _) = state.measure_collapsing(step.measure, rng)?;
        tau.push(u);
        state = post;
    }
    Ok((tau, state))
}

/// Applies a step's gates to a state.
pub fn apply_unitary(s: &StateVector, step: &Step) -> Result<StateVector> {
    let mut out = s.clone();
    for g in &step.gates {
        out.apply_gate(g)?;
    }
    Ok(out)
}

/// Random circuit: each step applies a random single-qubit unitary to every
/// qubit followed by a random chain of CNOTs, then measures a random prefix.
pub fn random_circuit<R: Rng + ?Sized>(qubits: usize, steps: usize, rng: &mut R) -> Result<Circuit> {
    let tau = std::f64::consts::TAU;
    let steps = (0..steps)
        .map(|_| {
            let mut gates = Vec::new();
            for q in 0..qubits {
                gates.push(Gate::Matrix {
                    targets: vec![q],
                    matrix: euler_unitary(
                        rng.gen::<f64>() * tau,
                        rng.gen::<f64>() * tau,
                        rng.gen::<f64>() * tau,
                    ),
                });
            }
            if qubits > 1 {
                for _ in 0..qubits {
                    let a = rng.gen_range(0..qubits);
                    let mut b = rng.gen_range(0..qubits - 1);
                    if b >= a {
                        b += 1;
                    }
                    gates.push(Gate::Cnot {
                        control: a,
                        target: b,
                    });
                }
            }
            Step::new(gates, rng.gen_range(0..=qubits))
        })
        .collect();
    Circuit::new(qubits, steps)
}

/// `H` on qubit 0, `CNOT 0→1`, measuring `m1` qubits; then a second step
/// measuring `m2` with no gates.
pub fn bell_circuit(m1: usize, m2: Option<usize>) -> Circuit {
    let mut steps = vec![Step::new(
        vec![
            Gate::H(0),
            Gate::Cnot {
                control: 0,
                target: 1,
            },
        ],
        m1,
    )];
    if let Some(m2) = m2 {
        steps.push(Step::measure_only(m2));
    }
    Circuit::new(2, steps).expect("bell circuit is valid")
}
