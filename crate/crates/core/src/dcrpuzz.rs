//! Distributional collision-resistant puzzles and the collision-finding
//! distribution `Col`.
//!
//! Circuit-backed samplers act on registers laid out as
//! `puzz ‖ ans ‖ junk`, starting from `|0…0⟩`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bits::BitString;
use crate::dist::{DistBuilder, DistJson, FiniteDist};
use crate::error::{Error, Result};
use crate::ncmo::{oracle_exact, oracle_sample, OracleOutput};
use crate::qsim::{Circuit, CircuitJson, Gate, StateVector, Step, MAX_QUBITS};
use crate::SimRng;

/// How `Samp(pp)` is given.
#[derive(Clone, Debug, PartialEq)]
pub enum SampSource {
    /// Joint law over `puzz ‖ ans`.
    Law(FiniteDist),
    /// `V_pp` as a gate list on `qubits` qubits.
    Circuit { qubits: usize, gates: Vec<Gate> },
}

/// Encodes a law into amplitudes `√Pr` with a single preparation gate.
pub fn purify(law: &FiniteDist) -> Result<SampSource> {
    let qubits = law.bit_len();
    if qubits == 0 || qubits > MAX_QUBITS {
        return Err(Error::too_large("purified register", MAX_QUBITS));
    }
    let mut amplitudes = vec![num_complex::Complex64::new(0.0, 0.0); 1 << qubits];
    for (s, p) in law.iter() {
        amplitudes[s.index()] = num_complex::Complex64::new(p.sqrt(), 0.0);
    }
    let gate = Gate::Prepare {
        targets: (0..qubits).collect(),
        amplitudes,
    };
    gate.validate(qubits)?;
    Ok(SampSource::Circuit {
        qubits,
        gates: vec![gate],
    })
}

/// `(puzz, ans, ans′)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CollisionTriple {
    pub puzz: BitString,
    pub ans: BitString,
    pub ans2: BitString,
}

impl CollisionTriple {
    pub fn concat(&self) -> BitString {
        BitString::concat_all(&[self.puzz, self.ans, self.ans2]).expect("triple fits")
    }

    pub fn split(s: &BitString, puzz_len: usize, ans_len: usize) -> Result<Self> {
        if s.len() != puzz_len + 2 * ans_len {
            return Err(Error::structural(format!(
                "{}-bit triple for puzzle {puzz_len} and answer {ans_len}",
                s.len()
            )));
        }
        Ok(CollisionTriple {
            puzz: s.prefix(puzz_len),
            ans: s.slice(puzz_len, puzz_len + ans_len),
            ans2: s.suffix(puzz_len + ans_len),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DcrScheme {
    pub pp_len: usize,
    pub puzz_len: usize,
    pub ans_len: usize,
    /// Law of `Setup(1^λ)`.
    pub setup: FiniteDist,
    samp: BTreeMap<BitString, SampSource>,
}

impl DcrScheme {
    /// Builds a scheme with one sampler per public parameter in the
    /// support of `setup`.
    pub fn new(
        puzz_len: usize,
        ans_len: usize,
        setup: FiniteDist,
        samp: BTreeMap<BitString, SampSource>,
    ) -> Result<Self> {
        let scheme = DcrScheme {
            pp_len: setup.bit_len(),
            puzz_len,
            ans_len,
            setup,
            samp,
        };
        for (pp, _) in scheme.setup.iter() {
            if !scheme.samp.contains_key(pp) {
                return Err(Error::structural(format!("no sampler for pp {pp}")));
            }
        }
        for (pp, src) in &scheme.samp {
            if pp.len() != scheme.pp_len {
                return Err(Error::structural(format!("pp {pp} has the wrong length")));
            }
            match src {
                SampSource::Law(law) => {
                    if law.bit_len() != puzz_len + ans_len {
                        return Err(Error::structural(format!(
                            "sampler law for pp {pp} has {} bits, expected {}",
                            law.bit_len(),
                            puzz_len + ans_len
                        )));
                    }
                }
                SampSource::Circuit { qubits, gates } => {
                    if *qubits < puzz_len + ans_len || *qubits > MAX_QUBITS {
                        return Err(Error::structural(format!(
                            "circuit on {qubits} qubits cannot hold puzzle and answer registers"
                        )));
                    }
                    for g in gates {
                        g.validate(*qubits)?;
                    }
                }
            }
        }
        Ok(scheme)
    }

    /// One sampler shared by every public parameter, with empty `pp`.
    pub fn single(puzz_len: usize, ans_len: usize, source: SampSource) -> Result<Self> {
        let mut samp = BTreeMap::new();
        samp.insert(BitString::EMPTY, source);
        Self::new(puzz_len, ans_len, FiniteDist::point(BitString::EMPTY), samp)
    }

    pub fn source(&self, pp: &BitString) -> Result<&SampSource> {
        self.samp
            .get(pp)
            .ok_or_else(|| Error::structural(format!("unknown pp {pp}")))
    }

    /// Exact law of `Samp(pp)` over `puzz ‖ ans`.
    pub fn samp_law(&self, pp: &BitString) -> Result<FiniteDist> {
        match self.source(pp)? {
            SampSource::Law(law) => Ok(law.clone()),
            SampSource::Circuit { .. } => {
                let state = self.prepared_state(pp)?;
                let keep = self.puzz_len + self.ans_len;
                state.readout_distribution().push_forward(|v| v.prefix(keep))
            }
        }
    }

    fn prepared_state(&self, pp: &BitString) -> Result<StateVector> {
        let SampSource::Circuit { qubits, gates } = self.source(pp)? else {
            return Err(Error::structural(format!("pp {pp} has no circuit")));
        };
        let mut s = StateVector::zero(*qubits)?;
        for g in gates {
            s.apply_gate(g)?;
        }
        Ok(s)
    }

    pub fn samp(&self, pp: &BitString, rng: &mut SimRng) -> Result<(BitString, BitString)> {
        let s = match self.source(pp)? {
            SampSource::Law(law) => law.sample(rng),
            SampSource::Circuit { .. } => self
                .prepared_state(pp)?
                .sample_readout(rng)
                .prefix(self.puzz_len + self.ans_len),
        };
        Ok((s.prefix(self.puzz_len), s.suffix(self.puzz_len)))
    }

    pub fn has_circuit(&self, pp: &BitString) -> bool {
        matches!(self.samp.get(pp), Some(SampSource::Circuit { .. }))
    }

    /// Replaces every law-backed sampler by its purification.
    pub fn purified(&self) -> Result<DcrScheme> {
        let samp = self
            .samp
            .iter()
            .map(|(pp, src)| {
                Ok((
                    *pp,
                    match src {
                        SampSource::Law(law) => purify(law)?,
                        other => other.clone(),
                    },
                ))
            })
            .collect::<Result<_>>()?;
        DcrScheme::new(self.puzz_len, self.ans_len, self.setup.clone(), samp)
    }

    pub fn triple_len(&self) -> usize {
        self.puzz_len + 2 * self.ans_len
    }

    pub fn from_json_str(text: &str, base: Option<&Path>) -> Result<DcrScheme> {
        let j: SchemeJson =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("scheme: {e}")))?;
        j.build(base)
    }
}

/// `Col(pp)`: `(puzz, ans) ← Samp(pp)`, then `ans′` from the conditional
/// law given `puzz`.
pub fn col(scheme: &DcrScheme, pp: &BitString, rng: &mut SimRng) -> Result<CollisionTriple> {
    let law = scheme.samp_law(pp)?;
    let s = law.sample(rng);
    let puzz = s.prefix(scheme.puzz_len);
    let ans2 = law.condition(&puzz)?.sample(rng);
    Ok(CollisionTriple {
        puzz,
        ans: s.suffix(scheme.puzz_len),
        ans2,
    })
}

/// Exact law of `Col(pp)` over `puzz ‖ ans ‖ ans′`.
pub fn col_exact(scheme: &DcrScheme, pp: &BitString) -> Result<FiniteDist> {
    col_law_from(&scheme.samp_law(pp)?, scheme.puzz_len)
}

/// `Col` for an arbitrary joint law over `puzz ‖ ans`.
pub fn col_law_from(law: &FiniteDist, puzz_len: usize) -> Result<FiniteDist> {
    let ans_len = law.bit_len() - puzz_len;
    let mut b = DistBuilder::new(puzz_len + 2 * ans_len);
    let puzzles = law.marginal_prefix(puzz_len)?;
    for (puzz, pp) in puzzles.iter() {
        let cond = law.condition(puzz)?;
        for (a, pa) in cond.iter() {
            for (a2, pa2) in cond.iter() {
                b.add(BitString::concat_all(&[*puzz, *a, *a2])?, pp * pa * pa2)?;
            }
        }
    }
    b.finish()
}

/// The two-step circuit `(V_pp, measure puzz, I, measure nothing)`.
pub fn dpp_instance(scheme: &DcrScheme, pp: &BitString) -> Result<Circuit> {
    match scheme.source(pp)? {
        SampSource::Circuit { qubits, gates } => Circuit::new(
            *qubits,
            vec![Step::new(gates.clone(), scheme.puzz_len), Step::measure_only(0)],
        ),
        SampSource::Law(_) => Err(Error::structural(format!(
            "pp {pp} has no commit circuit; purify the scheme first"
        ))),
    }
}

/// Reads `(v_1, v_2)` → `(puzz, ans, ans′)`.
pub fn triple_from_reads(scheme: &DcrScheme, out: &OracleOutput) -> Result<CollisionTriple> {
    if out.reads.len() != 2 {
        return Err(Error::structural("collision extraction needs two reads"));
    }
    let (p, a) = (scheme.puzz_len, scheme.ans_len);
    Ok(CollisionTriple {
        puzz: out.reads[0].prefix(p),
        ans: out.reads[0].slice(p, p + a),
        ans2: out.reads[1].slice(p, p + a),
    })
}

/// Same map on concatenated reads `v_1 ‖ v_2` of a `qubits`-qubit circuit.
pub fn triple_map(scheme: &DcrScheme, qubits: usize) -> impl Fn(&BitString) -> BitString + '_ {
    move |v| {
        let (p, a) = (scheme.puzz_len, scheme.ans_len);
        BitString::concat_all(&[v.prefix(p + a), v.slice(qubits + p, qubits + p + a)])
            .expect("triple fits")
    }
}

/// Repeated draws of collision triples for one `pp`.
pub type TripleSampler<'a> = Box<dyn Fn(&mut SimRng) -> Result<CollisionTriple> + Send + Sync + 'a>;

/// Produces collision triples from public parameters.
pub trait CollisionAdversary: Send + Sync {
    fn name(&self) -> String;
    fn law(&self, scheme: &DcrScheme, pp: &BitString) -> Result<FiniteDist>;

    fn sample(&self, scheme: &DcrScheme, pp: &BitString, rng: &mut SimRng) -> Result<CollisionTriple> {
        self.sampler(scheme, pp)?(rng)
    }

    /// Does the per-`pp` preparation once.
    fn sampler<'a>(&'a self, scheme: &'a DcrScheme, pp: &BitString) -> Result<TripleSampler<'a>> {
        let draw = self.law(scheme, pp)?.sampler();
        let (p, a) = (scheme.puzz_len, scheme.ans_len);
        Ok(Box::new(move |rng| CollisionTriple::split(&draw.sample(rng), p, a)))
    }
}

/// One sampler per public parameter in the support of `Setup`.
pub fn samplers<'a>(
    scheme: &'a DcrScheme,
    adv: &'a dyn CollisionAdversary,
) -> Result<BTreeMap<BitString, TripleSampler<'a>>> {
    scheme
        .setup
        .iter()
        .map(|(pp, _)| Ok((*pp, adv.sampler(scheme, pp)?)))
        .collect()
}

/// `Col` itself.
#[derive(Clone, Copy, Debug, Default)]
pub struct ColAdversary;

impl CollisionAdversary for ColAdversary {
    fn name(&self) -> String {
        "col".into()
    }

    fn law(&self, scheme: &DcrScheme, pp: &BitString) -> Result<FiniteDist> {
        col_exact(scheme, pp)
    }

    fn sampler<'a>(&'a self, scheme: &'a DcrScheme, pp: &BitString) -> Result<TripleSampler<'a>> {
        let law = scheme.samp_law(pp)?;
        let joint = law.sampler();
        let conditional = law
            .marginal_prefix(scheme.puzz_len)?
            .iter()
            .map(|(puzz, _)| Ok((*puzz, law.condition(puzz)?.sampler())))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let p = scheme.puzz_len;
        Ok(Box::new(move |rng| {
            let s = joint.sample(rng);
            let puzz = s.prefix(p);
            Ok(CollisionTriple {
                puzz,
                ans: s.suffix(p),
                ans2: conditional[&puzz].sample(rng),
            })
        }))
    }
}

/// An honest sample with its answer repeated.
#[derive(Clone, Copy, Debug, Default)]
pub struct Duplicated;

impl CollisionAdversary for Duplicated {
    fn name(&self) -> String {
        "duplicated".into()
    }

    fn law(&self, scheme: &DcrScheme, pp: &BitString) -> Result<FiniteDist> {
        let p = scheme.puzz_len;
        scheme
            .samp_law(pp)?
            .push_forward(|s| s.concat(&s.suffix(p)).expect("triple fits"))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FixedTriple(pub CollisionTriple);

impl CollisionAdversary for FixedTriple {
    fn name(&self) -> String {
        format!("fixed:{}", self.0.concat())
    }

    fn law(&self, _scheme: &DcrScheme, _pp: &BitString) -> Result<FiniteDist> {
        Ok(FiniteDist::point(self.0.concat()))
    }
}

/// Queries the oracle on the two-step circuit and extracts the triple.
#[derive(Clone, Copy, Debug, Default)]
pub struct OraclePipeline;

impl CollisionAdversary for OraclePipeline {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn law(&self, scheme: &DcrScheme, pp: &BitString) -> Result<FiniteDist> {
        let c = dpp_instance(scheme, pp)?;
        oracle_exact(&c)?.push_forward(triple_map(scheme, c.qubits()))
    }

    fn sampler<'a>(&'a self, scheme: &'a DcrScheme, pp: &BitString) -> Result<TripleSampler<'a>> {
        let c = dpp_instance(scheme, pp)?;
        Ok(Box::new(move |rng| {
            triple_from_reads(scheme, &oracle_sample(&c, rng)?)
        }))
    }
}

/// `SD({pp, A(pp)}, {pp, Col(pp)})` with `pp ← Setup`.
pub fn dcr_advantage(scheme: &DcrScheme, adv: &dyn CollisionAdversary) -> Result<f64> {
    let len = scheme.pp_len + scheme.triple_len();
    let mut a = DistBuilder::new(len);
    let mut c = DistBuilder::new(len);
    for (pp, p) in scheme.setup.iter() {
        let point = FiniteDist::point(*pp);
        let adv_law = adv.law(scheme, pp)?;
        if adv_law.bit_len() != scheme.triple_len() {
            return Err(Error::Protocol(format!(
                "adversary {} produced {}-bit triples, expected {}",
                adv.name(),
                adv_law.bit_len(),
                scheme.triple_len()
            )));
        }
        a.add_scaled(p, &point.product(&adv_law)?)?;
        c.add_scaled(p, &point.product(&col_exact(scheme, pp)?)?)?;
    }
    a.finish()?.sd(&c.finish()?)
}

/// Empirical version of [`dcr_advantage`] with `shots` draws per side.
pub fn dcr_advantage_empirical(
    scheme: &DcrScheme,
    adv: &dyn CollisionAdversary,
    shots: u64,
    rng: &mut SimRng,
) -> Result<f64> {
    let adv_draw = samplers(scheme, adv)?;
    let col_draw = samplers(scheme, &ColAdversary)?;
    let mut a = Vec::with_capacity(shots as usize);
    let mut c = Vec::with_capacity(shots as usize);
    for _ in 0..shots {
        let pp = scheme.setup.sample(rng);
        a.push(pp.concat(&adv_draw[&pp](rng)?.concat())?);
        let pp = scheme.setup.sample(rng);
        c.push(pp.concat(&col_draw[&pp](rng)?.concat())?);
    }
    let (_, a) = crate::dist::empirical(&a)?;
    let (_, c) = crate::dist::empirical(&c)?;
    a.sd(&c)
}

/// Circuit whose `Col` yields two preimages of `f` under a shared image:
/// `y` register first, `x` register second; `H` on `x`, then `y ⊕= f(x)`.
pub fn preimage_pair_scheme(table: &[usize], in_bits: usize, out_bits: usize) -> Result<DcrScheme> {
    if table.len() != 1 << in_bits || table.iter().any(|&y| y >= 1 << out_bits) {
        return Err(Error::structural("function table does not match its widths"));
    }
    let qubits = in_bits + out_bits;
    let mut gates: Vec<Gate> = (out_bits..qubits).map(Gate::H).collect();
    let perm = (0..1usize << qubits)
        .map(|i| {
            let y = i >> in_bits;
            let x = i & ((1 << in_bits) - 1);
            ((y ^ table[x]) << in_bits) | x
        })
        .collect();
    gates.push(Gate::Permutation {
        targets: (0..qubits).collect(),
        table: perm,
    });
    DcrScheme::single(out_bits, in_bits, SampSource::Circuit { qubits, gates })
}

/// Random circuit-backed scheme with the given register widths.
pub fn random_circuit_scheme(
    puzz_len: usize,
    ans_len: usize,
    junk: usize,
    rng: &mut SimRng,
) -> Result<DcrScheme> {
    let qubits = puzz_len + ans_len + junk;
    let depth = rng.gen_range(1..=2);
    let c = crate::qsim::random_circuit(qubits, depth, rng)?;
    let gates = c.steps().iter().flat_map(|s| s.gates.clone()).collect();
    DcrScheme::single(puzz_len, ans_len, SampSource::Circuit { qubits, gates })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceJson {
    Law(DistJson),
    Circuit {
        circuit: Value,
        #[serde(default)]
        puzz_register: Option<usize>,
    },
}

/// `{"pp_len", "puzz_len", "ans_len", "setup"?, "source": {"law": …} |
/// {"circuit": {"circuit": <path or inline>, "puzz_register": m}}}`
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SchemeJson {
    #[serde(default)]
    pub pp_len: usize,
    pub puzz_len: usize,
    pub ans_len: usize,
    #[serde(default)]
    pub setup: Option<DistJson>,
    pub source: SourceJson,
}

impl SchemeJson {
    pub fn build(&self, base: Option<&Path>) -> Result<DcrScheme> {
        let source = match &self.source {
            SourceJson::Law(d) => SampSource::Law(FiniteDist::from_json(d)?),
            SourceJson::Circuit {
                circuit,
                puzz_register,
            } => {
                if let Some(m) = puzz_register {
                    if *m != self.puzz_len {
                        return Err(Error::structural(format!(
                            "puzzle register of {m} qubits but puzz_len {}",
                            self.puzz_len
                        )));
                    }
                }
                let cj: CircuitJson = match circuit {
                    Value::String(path) => {
                        let full = base.map(|b| b.join(path)).unwrap_or_else(|| path.into());
                        let text = std::fs::read_to_string(&full).map_err(|e| {
                            Error::Parse(format!("reading {}: {e}", full.display()))
                        })?;
                        serde_json::from_str(&text)
                            .map_err(|e| Error::Parse(format!("circuit: {e}")))?
                    }
                    inline => serde_json::from_value(inline.clone())
                        .map_err(|e| Error::Parse(format!("circuit: {e}")))?,
                };
                let c = Circuit::try_from(&cj)?;
                if c.measures().iter().any(|&m| m != 0) {
                    return Err(Error::structural(
                        "commit circuits must not contain measurements",
                    ));
                }
                SampSource::Circuit {
                    qubits: c.qubits(),
                    gates: c.steps().iter().flat_map(|s| s.gates.clone()).collect(),
                }
            }
        };
        let setup = match &self.setup {
            Some(d) => FiniteDist::from_json(d)?,
            None => FiniteDist::uniform(self.pp_len),
        };
        if setup.bit_len() != self.pp_len {
            return Err(Error::structural("setup law does not match pp_len"));
        }
        let samp = setup.iter().map(|(pp, _)| (*pp, source.clone())).collect();
        DcrScheme::new(self.puzz_len, self.ans_len, setup, samp)
    }
}
