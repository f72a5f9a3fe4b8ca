use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Tolerance for unitarity checks at load time.
pub const UNITARY_TOL: f64 = 1e-7;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Primitive operations accepted inside a step.
///
/// Targets are qubit indices; qubit 0 is the most significant bit of a basis
/// index. For multi-qubit matrices the first target is the most significant
/// bit of the local index.
#[derive(Clone, Debug, PartialEq)]
pub enum Gate {
    H(usize),
    X(usize),
    Y(usize),
    Z(usize),
    S(usize),
    T(usize),
    Cnot { control: usize, target: usize },
    Cz(usize, usize),
    Swap(usize, usize),
    CPhase { control: usize, target: usize, angle: f64 },
    /// Dense unitary on `targets`, row-major, `4^k` entries.
    Matrix { targets: Vec<usize>, matrix: Vec<Complex64> },
    /// Reversible classical map on the basis states of `targets`.
    Permutation { targets: Vec<usize>, table: Vec<usize> },
    /// Householder reflection sending `|0…0⟩` on `targets` to the given
    /// normalized state. Applied in linear time, never densified.
    Prepare { targets: Vec<usize>, amplitudes: Vec<Complex64> },
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

impl Gate {
    pub fn targets(&self) -> Vec<usize> {
        match self {
            Gate::H(q) | Gate::X(q) | Gate::Y(q) | Gate::Z(q) | Gate::S(q) | Gate::T(q) => {
                vec![*q]
            }
            Gate::Cnot { control, target } | Gate::CPhase { control, target, .. } => {
                vec![*control, *target]
            }
            Gate::Cz(a, b) | Gate::Swap(a, b) => vec![*a, *b],
            Gate::Matrix { targets, .. }
            | Gate::Permutation { targets, .. }
            | Gate::Prepare { targets, .. } => targets.clone(),
        }
    }

    /// Dense matrix for the fixed named gates.
    fn named_matrix(&self) -> Option<Vec<Complex64>> {
        let z = c(0.0, 0.0);
        let o = c(1.0, 0.0);
        let h = c(FRAC_1_SQRT_2, 0.0);
        Some(match self {
            Gate::H(_) => vec![h, h, h, -h],
            Gate::X(_) => vec![z, o, o, z],
            Gate::Y(_) => vec![z, c(0.0, -1.0), c(0.0, 1.0), z],
            Gate::Z(_) => vec![o, z, z, -o],
            Gate::S(_) => vec![o, z, z, c(0.0, 1.0)],
            Gate::T(_) => vec![o, z, z, Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)],
            Gate::Cz(..) => diag(&[o, o, o, -o]),
            Gate::CPhase { angle, .. } => diag(&[o, o, o, Complex64::from_polar(1.0, *angle)]),
            Gate::Cnot { .. } => permutation_matrix(&[0, 1, 3, 2]),
            Gate::Swap(..) => permutation_matrix(&[0, 2, 1, 3]),
            _ => return None,
        })
    }

    /// Checks target ranges and unitarity against a register of `qubits`.
    pub fn validate(&self, qubits: usize) -> Result<()> {
        let targets = self.targets();
        for (i, &q) in targets.iter().enumerate() {
            if q >= qubits {
                return Err(Error::structural(format!(
                    "gate target {q} outside register of {qubits} qubits"
                )));
            }
            if targets[..i].contains(&q) {
                return Err(Error::structural(format!("repeated gate target {q}")));
            }
        }
        if targets.is_empty() {
            return Err(Error::structural("gate without targets"));
        }
        let dim = 1usize << targets.len();
        match self {
            Gate::Matrix { matrix, .. } => {
                if matrix.len() != dim * dim {
                    return Err(Error::structural(format!(
                        "matrix on {} qubits needs {} entries, got {}",
                        targets.len(),
                        dim * dim,
                        matrix.len()
                    )));
                }
                check_unitary(matrix, dim)
            }
            Gate::Permutation { table, .. } => {
                if table.len() != dim {
                    return Err(Error::structural(format!(
                        "permutation on {} qubits needs {dim} entries",
                        targets.len()
                    )));
                }
                let mut seen = vec![false; dim];
                for &t in table {
                    if t >= dim || std::mem::replace(&mut seen[t], true) {
                        return Err(Error::structural("permutation table is not a bijection"));
                    }
                }
                Ok(())
            }
            Gate::Prepare { amplitudes, .. } => {
                if amplitudes.len() != dim {
                    return Err(Error::structural(format!(
                        "prepared state on {} qubits needs {dim} amplitudes",
                        targets.len()
                    )));
                }
                let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
                if (norm - 1.0).abs() > UNITARY_TOL {
                    return Err(Error::structural(format!(
                        "prepared state has squared norm {norm}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Applies the gate in place to a `qubits`-qubit amplitude vector.
    pub fn apply(&self, amps: &mut [Complex64], qubits: usize) {
        let targets = self.targets();
        match self {
            Gate::Matrix { matrix, .. } => apply_matrix(amps, qubits, &targets, matrix),
            Gate::Permutation { table, .. } => apply_permutation(amps, qubits, &targets, table),
            Gate::Prepare { amplitudes, .. } => apply_prepare(amps, qubits, &targets, amplitudes),
            named => {
                let m = named.named_matrix().expect("named gate has a matrix");
                apply_matrix(amps, qubits, &targets, &m)
            }
        }
    }
}

fn diag(d: &[Complex64]) -> Vec<Complex64> {
    let n = d.len();
    let mut m = vec![c(0.0, 0.0); n * n];
    for (i, v) in d.iter().enumerate() {
        m[i * n + i] = *v;
    }
    m
}

fn permutation_matrix(p: &[usize]) -> Vec<Complex64> {
    let n = p.len();
    let mut m = vec![c(0.0, 0.0); n * n];
    for (col, &row) in p.iter().enumerate() {
        m[row * n + col] = c(1.0, 0.0);
    }
    m
}

fn check_unitary(m: &[Complex64], dim: usize) -> Result<()> {
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = c(0.0, 0.0);
            for k in 0..dim {
                acc += m[k * dim + i].conj() * m[k * dim + j];
            }
            let expect = if i == j { 1.0 } else { 0.0 };
            if (acc - expect).norm() > UNITARY_TOL {
                return Err(Error::structural(format!(
                    "matrix is not unitary: (U†U)[{i}][{j}] = {acc}"
                )));
            }
        }
    }
    Ok(())
}

/// Basis-index offsets for every local index of `targets`.
fn local_offsets(qubits: usize, targets: &[usize]) -> (Vec<usize>, usize) {
    let k = targets.len();
    let mut target_mask = 0usize;
    let offsets = (0..1usize << k)
        .map(|local| {
            let mut off = 0usize;
            for (j, &q) in targets.iter().enumerate() {
                if (local >> (k - 1 - j)) & 1 == 1 {
                    off |= 1 << (qubits - 1 - q);
                }
            }
            off
        })
        .collect();
    for &q in targets {
        target_mask |= 1 << (qubits - 1 - q);
    }
    (offsets, target_mask)
}

fn apply_matrix(amps: &mut [Complex64], qubits: usize, targets: &[usize], m: &[Complex64]) {
    let (offsets, target_mask) = local_offsets(qubits, targets);
    let dim = offsets.len();
    let mut buf = vec![c(0.0, 0.0); dim];
    for base in (0..amps.len()).filter(|b| b & target_mask == 0) {
        for (slot, off) in buf.iter_mut().zip(&offsets) {
            *slot = amps[base | off];
        }
        for (row, off) in offsets.iter().enumerate() {
            let mut acc = c(0.0, 0.0);
            for (col, v) in buf.iter().enumerate() {
                acc += m[row * dim + col] * v;
            }
            amps[base | off] = acc;
        }
    }
}

fn apply_permutation(amps: &mut [Complex64], qubits: usize, targets: &[usize], table: &[usize]) {
    let (offsets, target_mask) = local_offsets(qubits, targets);
    let mut buf = vec![c(0.0, 0.0); offsets.len()];
    for base in (0..amps.len()).filter(|b| b & target_mask == 0) {
        for (slot, off) in buf.iter_mut().zip(&offsets) {
            *slot = amps[base | off];
        }
        for (src, v) in buf.iter().enumerate() {
            amps[base | offsets[table[src]]] = *v;
        }
    }
}

fn apply_prepare(amps: &mut [Complex64], qubits: usize, targets: &[usize], phi: &[Complex64]) {
    // U = e·(I − 2|r⟩⟨r|) with r ∝ e|0⟩ − φ and e the phase of ⟨0|φ⟩, so U|0⟩ = φ.
    let phase = if phi[0].norm() > 0.0 {
        phi[0] / phi[0].norm()
    } else {
        c(1.0, 0.0)
    };
    let mut r: Vec<Complex64> = phi.iter().map(|a| -a).collect();
    r[0] += phase;
    let norm = r.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let (offsets, target_mask) = local_offsets(qubits, targets);
    if norm < 1e-15 {
        for a in amps.iter_mut() {
            *a *= phase;
        }
        return;
    }
    for v in r.iter_mut() {
        *v /= norm;
    }
    for base in (0..amps.len()).filter(|b| b & target_mask == 0) {
        let mut overlap = c(0.0, 0.0);
        for (rv, off) in r.iter().zip(&offsets) {
            overlap += rv.conj() * amps[base | off];
        }
        for (rv, off) in r.iter().zip(&offsets) {
            let a = &mut amps[base | off];
            *a = phase * (*a - 2.0 * rv * overlap);
        }
    }
}

/// JSON form of a gate: `{"name": ..., "targets": [...], ...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateJson {
    pub name: String,
    pub targets: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Value>,
}

fn parse_complex(v: &Value) -> Result<Complex64> {
    match v {
        Value::Array(pair) if pair.len() == 2 => {
            let re = pair[0].as_f64();
            let im = pair[1].as_f64();
            match (re, im) {
                (Some(re), Some(im)) => Ok(c(re, im)),
                _ => Err(Error::Parse(format!("complex entry {v} is not numeric"))),
            }
        }
        Value::Number(n) => Ok(c(n.as_f64().unwrap_or(f64::NAN), 0.0)),
        _ => Err(Error::Parse(format!("expected [re, im], got {v}"))),
    }
}

/// Accepts a flat list of `[re, im]` pairs or a list of rows of pairs.
fn parse_complex_list(v: &Value) -> Result<Vec<Complex64>> {
    let items = v
        .as_array()
        .ok_or_else(|| Error::Parse("expected an array of [re, im] pairs".into()))?;
    let nested = items
        .first()
        .and_then(|r| r.as_array())
        .and_then(|r| r.first())
        .is_some_and(|e| e.is_array());
    if nested {
        items
            .iter()
            .flat_map(|row| row.as_array().cloned().unwrap_or_default())
            .map(|e| parse_complex(&e))
            .collect()
    } else {
        items.iter().map(parse_complex).collect()
    }
}

fn complex_list_json(v: &[Complex64]) -> Value {
    Value::Array(
        v.iter()
            .map(|z| serde_json::json!([z.re, z.im]))
            .collect(),
    )
}

impl TryFrom<&GateJson> for Gate {
    type Error = Error;

    fn try_from(g: &GateJson) -> Result<Gate> {
        let t = &g.targets;
        let arity = |n: usize| -> Result<()> {
            if t.len() != n {
                Err(Error::Parse(format!(
                    "gate {} takes {n} targets, got {}",
                    g.name,
                    t.len()
                )))
            } else {
                Ok(())
            }
        };
        let name = g.name.to_ascii_lowercase();
        let gate = match name.as_str() {
            "h" | "x" | "y" | "z" | "s" | "t" => {
                arity(1)?;
                let q = t[0];
                match name.as_str() {
                    "h" => Gate::H(q),
                    "x" => Gate::X(q),
                    "y" => Gate::Y(q),
                    "z" => Gate::Z(q),
                    "s" => Gate::S(q),
                    _ => Gate::T(q),
                }
            }
            "cnot" | "cx" => {
                arity(2)?;
                Gate::Cnot {
                    control: t[0],
                    target: t[1],
                }
            }
            "cz" => {
                arity(2)?;
                Gate::Cz(t[0], t[1])
            }
            "swap" => {
                arity(2)?;
                Gate::Swap(t[0], t[1])
            }
            "cphase" => {
                arity(2)?;
                Gate::CPhase {
                    control: t[0],
                    target: t[1],
                    angle: g
                        .angle
                        .ok_or_else(|| Error::Parse("cphase needs an angle".into()))?,
                }
            }
            "u" | "unitary" | "matrix" => Gate::Matrix {
                targets: t.clone(),
                matrix: parse_complex_list(
                    g.matrix
                        .as_ref()
                        .ok_or_else(|| Error::Parse(format!("gate {} needs a matrix", g.name)))?,
                )?,
            },
            "perm" | "permutation" => Gate::Permutation {
                targets: t.clone(),
                table: g
                    .table
                    .clone()
                    .ok_or_else(|| Error::Parse("permutation needs a table".into()))?,
            },
            "prepare" => Gate::Prepare {
                targets: t.clone(),
                amplitudes: parse_complex_list(
                    g.amplitudes
                        .as_ref()
                        .ok_or_else(|| Error::Parse("prepare needs amplitudes".into()))?,
                )?,
            },
            other => return Err(Error::Parse(format!("unknown gate {other:?}"))),
        };
        Ok(gate)
    }
}

impl From<&Gate> for GateJson {
    fn from(g: &Gate) -> GateJson {
        let mut out = GateJson {
            name: String::new(),
            targets: g.targets(),
            matrix: None,
            angle: None,
            table: None,
            amplitudes: None,
        };
        out.name = match g {
            Gate::H(_) => "h",
            Gate::X(_) => "x",
            Gate::Y(_) => "y",
            Gate::Z(_) => "z",
            Gate::S(_) => "s",
            Gate::T(_) => "t",
            Gate::Cnot { .. } => "cnot",
            Gate::Cz(..) => "cz",
            Gate::Swap(..) => "swap",
            Gate::CPhase { angle, .. } => {
                out.angle = Some(*angle);
                "cphase"
            }
            Gate::Matrix { matrix, .. } => {
                out.matrix = Some(complex_list_json(matrix));
                "unitary"
            }
            Gate::Permutation { table, .. } => {
                out.table = Some(table.clone());
                "perm"
            }
            Gate::Prepare { amplitudes, .. } => {
                out.amplitudes = Some(complex_list_json(amplitudes));
                "prepare"
            }
        }
        .to_string();
        out
    }
}

/// Single-qubit unitary from Euler angles, `Rz(a)·Ry(b)·Rz(c)`.
pub fn euler_unitary(a: f64, b: f64, cc: f64) -> Vec<Complex64> {
    let (sb, cb) = (b / 2.0).sin_cos();
    let e = |t: f64| Complex64::from_polar(1.0, t);
    vec![
        e(-(a + cc) / 2.0) * cb,
        -e(-(a - cc) / 2.0) * sb,
        e((a - cc) / 2.0) * sb,
        e((a + cc) / 2.0) * cb,
    ]
}
