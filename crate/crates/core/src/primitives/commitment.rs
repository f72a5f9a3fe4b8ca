//! Two-message commitment that compresses `x ‖ θ` through a public random
//! table, and its collision-puzzle forms.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{bit, play, xor_oracle, GameReport};
use crate::bits::BitString;
use crate::dcrpuzz::{samplers, CollisionAdversary, CollisionTriple, DcrScheme, SampSource};
use crate::dist::{DistBuilder, FiniteDist};
use crate::error::{Error, Result};
use crate::qsim::{Gate, StateVector, MAX_QUBITS};
use crate::SimRng;

/// Classical view of a commitment: the joint law of `(s_1, s_2)` and the
/// receiver's decision.
pub trait CommitmentScheme: Send + Sync {
    fn name(&self) -> String;
    fn s1_len(&self) -> usize;
    fn s2_len(&self) -> usize;
    /// Law of `s_1 ‖ s_2` with `ψ_S` from `S_1(r_1, committed)` and
    /// `s_2 ← S_2(open, ψ_S)`.
    fn opening_law(&self, committed: bool, open: bool) -> Result<FiniteDist>;
    fn r2(&self, s1: &BitString, s2: &BitString, b: bool) -> bool;

    fn s1_law(&self, b: bool) -> Result<FiniteDist> {
        self.opening_law(b, b)?.marginal_prefix(self.s1_len())
    }
}

/// Commitment given directly by its two honest laws; the receiver accepts
/// exactly the pairs in the support for `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct AbstractCommitment {
    pub s1_len: usize,
    pub laws: [FiniteDist; 2],
}

impl CommitmentScheme for AbstractCommitment {
    fn name(&self) -> String {
        "abstract".into()
    }

    fn s1_len(&self) -> usize {
        self.s1_len
    }

    fn s2_len(&self) -> usize {
        self.laws[0].bit_len() - self.s1_len
    }

    fn opening_law(&self, committed: bool, _open: bool) -> Result<FiniteDist> {
        Ok(self.laws[committed as usize].clone())
    }

    fn r2(&self, s1: &BitString, s2: &BitString, b: bool) -> bool {
        s1.concat(s2)
            .map(|s| self.laws[b as usize].prob(&s) > 0.0)
            .unwrap_or(false)
    }
}

/// `S_1(r_1, b)` prepares `Σ_{x: x_1 = b, θ} |x, θ⟩|R(x‖θ)⟩` and measures
/// `y = R(x‖θ)`; `S_2` measures `x ‖ θ`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyCommitment {
    n: usize,
    compression: usize,
    table: Vec<usize>,
}

/// Residual sender state after `S_1`, on registers `x ‖ θ`.
#[derive(Clone, Debug)]
pub struct SenderState {
    pub b: bool,
    pub state: StateVector,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComVariant {
    /// Runs `S_1(r_1, 0)`, then opens to a uniform `b`.
    Literal,
    /// Commits to `(|0⟩ + |1⟩)/√2`, measures `s_1`, then `(b, s_2)`.
    Coherent,
}

impl std::str::FromStr for ComVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(ComVariant::Literal),
            "coherent" => Ok(ComVariant::Coherent),
            other => Err(Error::Parse(format!("unknown variant {other:?}"))),
        }
    }
}

impl ToyCommitment {
    pub fn toy(n: usize, compression: usize, rng: &mut SimRng) -> Result<Self> {
        let size = 1usize << (2 * n);
        let table = (0..size)
            .map(|_| rng.gen_range(0..1usize << n.saturating_sub(compression)))
            .collect();
        Self::from_table(n, compression, table)
    }

    pub fn from_table(n: usize, compression: usize, table: Vec<usize>) -> Result<Self> {
        if n == 0 || compression >= n {
            return Err(Error::structural(format!(
                "compression {compression} must lie below n = {n}"
            )));
        }
        let y_len = n - compression;
        if y_len + 1 + 2 * n > MAX_QUBITS {
            return Err(Error::too_large("commitment register qubits", MAX_QUBITS));
        }
        if table.len() != 1 << (2 * n) || table.iter().any(|&y| y >> y_len != 0) {
            return Err(Error::structural("commitment table has the wrong shape"));
        }
        Ok(ToyCommitment {
            n,
            compression,
            table,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn y_len(&self) -> usize {
        self.n - self.compression
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    /// Gates of `S_1(r_1, b)` on registers `y ‖ x ‖ θ` starting at `y0`
    /// and `x0`.
    fn commit_gates(&self, b: Option<bool>, y0: usize, x0: usize) -> Vec<Gate> {
        let n = self.n;
        let mut gates = Vec::new();
        match b {
            Some(true) => gates.push(Gate::X(x0)),
            Some(false) => {}
            None => gates.push(Gate::H(x0)),
        }
        gates.extend((x0 + 1..x0 + 2 * n).map(Gate::H));
        let targets = (y0..y0 + self.y_len()).chain(x0..x0 + 2 * n).collect();
        gates.push(xor_oracle(targets, &self.table, 2 * n));
        gates
    }

    fn commit_state(&self, b: bool) -> Result<StateVector> {
        let mut s = StateVector::zero(self.y_len() + 2 * self.n)?;
        for g in self.commit_gates(Some(b), 0, self.y_len()) {
            s.apply_gate(&g)?;
        }
        Ok(s)
    }

    pub fn s1(&self, b: bool, rng: &mut SimRng) -> Result<(BitString, SenderState)> {
        let (y, post, _) = self.commit_state(b)?.measure_collapsing(self.y_len(), rng)?;
        Ok((y, SenderState { b, state: post }))
    }

    pub fn s2(&self, _b: bool, psi: SenderState, rng: &mut SimRng) -> BitString {
        psi.state.sample_readout(rng).suffix(self.y_len())
    }

    /// Preimage counts of each `y` split by the first bit of `x`.
    pub fn parity_counts(&self) -> BTreeMap<usize, [usize; 2]> {
        let mut counts = BTreeMap::new();
        for (pre, &y) in self.table.iter().enumerate() {
            counts.entry(y).or_insert([0, 0])[bit(pre, 0, 2 * self.n)] += 1;
        }
        counts
    }

    /// `Pr_y[y has preimages of both parities]` for uniform `x ‖ θ`.
    pub fn both_parity_mass(&self) -> f64 {
        let total = self.table.len() as f64;
        self.parity_counts()
            .values()
            .filter(|[a, b]| *a > 0 && *b > 0)
            .map(|[a, b]| (a + b) as f64 / total)
            .sum()
    }
}

impl CommitmentScheme for ToyCommitment {
    fn name(&self) -> String {
        format!("toy-n{}-c{}", self.n, self.compression)
    }

    fn s1_len(&self) -> usize {
        self.y_len()
    }

    fn s2_len(&self) -> usize {
        2 * self.n
    }

    fn opening_law(&self, committed: bool, _open: bool) -> Result<FiniteDist> {
        Ok(self.commit_state(committed)?.readout_distribution())
    }

    fn r2(&self, s1: &BitString, s2: &BitString, b: bool) -> bool {
        s1.len() == self.y_len()
            && s2.len() == 2 * self.n
            && self.table[s2.index()] == s1.index()
            && s2.get(0) == b
    }
}

/// `puzz = s_1`, `ans = b ‖ s_2` on registers `y ‖ b ‖ x ‖ θ`.
pub fn com_to_dcrpuzz(com: &ToyCommitment, variant: ComVariant) -> Result<DcrScheme> {
    let (y_len, n) = (com.y_len(), com.n);
    let (bq, x0) = (y_len, y_len + 1);
    let qubits = y_len + 1 + 2 * n;
    let gates = match variant {
        ComVariant::Literal => {
            let mut g = vec![Gate::H(bq)];
            g.extend(com.commit_gates(Some(false), 0, x0));
            g
        }
        ComVariant::Coherent => {
            let mut g = com.commit_gates(None, 0, x0);
            g.insert(
                1,
                Gate::Cnot {
                    control: x0,
                    target: bq,
                },
            );
            g
        }
    };
    DcrScheme::single(y_len, 1 + 2 * n, SampSource::Circuit { qubits, gates })
}

fn binding_win(com: &dyn CommitmentScheme, t: &CollisionTriple) -> bool {
    com.r2(&t.puzz, &t.ans.suffix(1), false) && com.r2(&t.puzz, &t.ans2.suffix(1), true)
}

/// Exact success of the binding breaker that outputs `(s_1, s_2, s_2′)`.
pub fn com_break_exact(
    com: &dyn CommitmentScheme,
    scheme: &DcrScheme,
    source: &dyn CollisionAdversary,
) -> Result<f64> {
    let mut win = 0.0;
    for (pp, ppp) in scheme.setup.iter() {
        for (t, p) in source.law(scheme, pp)?.iter() {
            if binding_win(com, &CollisionTriple::split(t, scheme.puzz_len, scheme.ans_len)?) {
                win += ppp * p;
            }
        }
    }
    Ok(win)
}

pub fn com_break_via_collision(
    com: &dyn CommitmentScheme,
    scheme: &DcrScheme,
    source: &dyn CollisionAdversary,
    trials: u64,
    rng: &mut SimRng,
) -> Result<GameReport> {
    let exact = com_break_exact(com, scheme, source)?;
    let draw = samplers(scheme, source)?;
    let setup = scheme.setup.sampler();
    let successes = play(trials, rng, |r| {
        let pp = setup.sample(r);
        Ok(binding_win(com, &draw[&pp](r)?))
    })?;
    Ok(GameReport {
        game: format!("binding/{}/{}", com.name(), source.name()),
        trials,
        successes,
        exact: Some(exact),
    })
}

/// `Σ_y Pr[y] · q_0(y) · q_1(y)` from preimage counts, where `q_b` is the
/// fraction of preimages of `y` with first bit `b`. Equals half the
/// probability that two independent preimages of a common `y` differ in
/// parity.
pub fn pair_parity_success(com: &ToyCommitment) -> f64 {
    let total = com.table.len() as f64;
    com.parity_counts()
        .values()
        .map(|&[a, b]| {
            let k = (a + b) as f64;
            (k / total) * (a as f64 / k) * (b as f64 / k)
        })
        .sum()
}

/// Where algorithm C's second sender state comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regeneration {
    /// `S_1(r_1, 0)` again, conditioned on the same `s_1`.
    Committed,
    /// `S_1(r_1, 1)`, conditioned on the same `s_1`.
    Opening,
}

impl Regeneration {
    fn bit(self) -> bool {
        matches!(self, Regeneration::Opening)
    }
}

/// Opens once to 0 and once to 1 from independently regenerated sender
/// states sharing `s_1`.
pub fn algorithm_c_com(
    com: &dyn CommitmentScheme,
    regen: Regeneration,
    rng: &mut SimRng,
) -> Result<(BitString, BitString, BitString)> {
    let k = com.s1_len();
    let first = com.opening_law(false, false)?.sample(rng);
    let s1 = first.prefix(k);
    let second = com.opening_law(regen.bit(), true)?.condition(&s1)?.sample(rng);
    Ok((s1, first.suffix(k), second))
}

/// Exact law of algorithm C's output `s_1 ‖ s_2 ‖ s_2′`.
pub fn algorithm_c_com_law(com: &dyn CommitmentScheme, regen: Regeneration) -> Result<FiniteDist> {
    let k = com.s1_len();
    let first = com.opening_law(false, false)?;
    let second = com.opening_law(regen.bit(), true)?;
    let mut out = DistBuilder::new(k + 2 * com.s2_len());
    for (s1, p) in first.marginal_prefix(k)?.iter() {
        let a = first.condition(s1)?;
        let b = second.condition(s1)?;
        out.add_scaled(p, &FiniteDist::point(*s1).product(&a.product(&b)?)?)?;
    }
    out.finish()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpeningValue {
    pub s1: BitString,
    pub prob: [f64; 2],
    /// Opening success for each `b`, if `s_1` can arise under `b`.
    pub open: [Option<f64>; 2],
    pub in_g: [bool; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    /// `1/p`.
    pub threshold: f64,
    pub correctness: [f64; 2],
    pub hiding_sd: f64,
    pub per_s1: Vec<OpeningValue>,
    /// Mass of `G_1` under `S_1(r_1, 0)`.
    pub g1_mass_under_0: f64,
    /// Mass of `G_0 ∩ G_1` under `S_1(r_1, 0)`.
    pub g01_mass_under_0: f64,
    /// `Σ_{s_1} Pr[s_1 | 0] · c_0(s_1) · c_1(s_1)`.
    pub algorithm_c_value: f64,
    /// `(1 − δ)(1 − 1/p)²` with `1 − δ` the mass of `G_0 ∩ G_1` under 0.
    pub lemma_bound: f64,
    pub bound_holds: bool,
}

fn open_value(com: &dyn CommitmentScheme, law: &FiniteDist, s1: &BitString, b: bool) -> Result<Option<f64>> {
    match law.condition(s1) {
        Ok(cond) => Ok(Some(
            cond.iter()
                .filter(|(s2, _)| com.r2(s1, s2, b))
                .map(|(_, p)| p)
                .sum(),
        )),
        Err(Error::ImpossibleCondition(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Exact per-`s_1` opening values, `G_b` memberships at threshold `1/p`,
/// hiding distance and the resulting lower bound on algorithm C.
pub fn hiding_and_correctness_audit(com: &dyn CommitmentScheme, threshold: f64) -> Result<AuditReport> {
    let k = com.s1_len();
    let laws = [com.opening_law(false, false)?, com.opening_law(true, true)?];
    let s1_laws = [laws[0].marginal_prefix(k)?, laws[1].marginal_prefix(k)?];
    let mut keys: Vec<BitString> = s1_laws
        .iter()
        .flat_map(|d| d.iter().map(|(s, _)| *s))
        .collect();
    keys.sort();
    keys.dedup();
    let mut per_s1 = Vec::new();
    let mut correctness = [0.0; 2];
    let (mut g1, mut g01, mut value) = (0.0, 0.0, 0.0);
    for s1 in keys {
        let prob = [s1_laws[0].prob(&s1), s1_laws[1].prob(&s1)];
        let open = [
            open_value(com, &laws[0], &s1, false)?,
            open_value(com, &laws[1], &s1, true)?,
        ];
        let c = [open[0].unwrap_or(0.0), open[1].unwrap_or(0.0)];
        let in_g = [c[0] >= 1.0 - threshold, c[1] >= 1.0 - threshold];
        for b in 0..2 {
            correctness[b] += prob[b] * c[b];
        }
        if in_g[1] {
            g1 += prob[0];
        }
        if in_g[0] && in_g[1] {
            g01 += prob[0];
        }
        value += prob[0] * c[0] * c[1];
        per_s1.push(OpeningValue {
            s1,
            prob,
            open,
            in_g,
        });
    }
    let lemma_bound = g01 * (1.0 - threshold).powi(2);
    Ok(AuditReport {
        threshold,
        correctness,
        hiding_sd: s1_laws[0].sd(&s1_laws[1])?,
        per_s1,
        g1_mass_under_0: g1,
        g01_mass_under_0: g01,
        algorithm_c_value: value,
        lemma_bound,
        bound_holds: value + 1e-12 >= lemma_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dcrpuzz::{col_exact, ColAdversary, Duplicated, FixedTriple, OraclePipeline};
    use crate::primitives::bits;
    use rand::SeedableRng;

    fn toy(seed: u64) -> ToyCommitment {
        ToyCommitment::toy(3, 1, &mut SimRng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn honest_openings_accept() {
        let com = toy(1);
        for b in [false, true] {
            let law = com.opening_law(b, b).unwrap();
            for (s, _) in law.iter() {
                assert!(com.r2(&s.prefix(2), &s.suffix(2), b));
            }
            let mut rng = SimRng::seed_from_u64(2);
            let (y, psi) = com.s1(b, &mut rng).unwrap();
            let s2 = com.s2(b, psi, &mut rng);
            assert!(com.r2(&y, &s2, b));
        }
        let bad = (0..64).find(|&i| com.table()[i] != 0).unwrap();
        assert!(!com.r2(&bits(0, 2), &bits(bad, 6), bad >> 5 == 1));
    }

    #[test]
    fn coherent_form_collisions() {
        let com = toy(3);
        let scheme = com_to_dcrpuzz(&com, ComVariant::Coherent).unwrap();
        let col = col_exact(&scheme, &BitString::EMPTY).unwrap();
        let oracle = OraclePipeline.law(&scheme, &BitString::EMPTY).unwrap();
        assert!(oracle.sd(&col).unwrap() < 1e-9);
        let differ: f64 = col
            .iter()
            .filter(|(t, _)| t.get(2) != t.get(9))
            .map(|(_, p)| p)
            .sum();
        let pair = pair_parity_success(&com);
        assert!((differ - 2.0 * pair).abs() < 1e-9);
        let exact = com_break_exact(&com, &scheme, &ColAdversary).unwrap();
        assert!((exact - pair).abs() < 1e-9);
        assert!(pair <= 0.5 * com.both_parity_mass() + 1e-12);
        let mut rng = SimRng::seed_from_u64(4);
        let r = com_break_via_collision(&com, &scheme, &ColAdversary, 10_000, &mut rng).unwrap();
        assert!(r.empirical_gap().unwrap() < 0.02);
        let puzz = scheme.samp_law(&BitString::EMPTY).unwrap().marginal_prefix(2).unwrap();
        let (a, b) = (com.s1_law(false).unwrap(), com.s1_law(true).unwrap());
        let s1 = FiniteDist::mixture(2, [(0.5, &a), (0.5, &b)]).unwrap();
        assert!(puzz.sd(&s1).unwrap() < 1e-12);
    }

    #[test]
    fn literal_form_never_binds() {
        let com = toy(5);
        let scheme = com_to_dcrpuzz(&com, ComVariant::Literal).unwrap();
        let col = col_exact(&scheme, &BitString::EMPTY).unwrap();
        assert!(col.iter().all(|(t, _)| !t.get(3) && !t.get(10)));
        assert_eq!(com_break_exact(&com, &scheme, &ColAdversary).unwrap(), 0.0);
        let puzz = scheme.samp_law(&BitString::EMPTY).unwrap().marginal_prefix(2).unwrap();
        assert!(puzz.sd(&com.s1_law(false).unwrap()).unwrap() < 1e-12);
        assert_eq!(com_break_exact(&com, &scheme, &Duplicated).unwrap(), 0.0);
        let t = col.iter().next().unwrap().0;
        let fixed = FixedTriple(CollisionTriple::split(t, 2, 7).unwrap());
        assert_eq!(com_break_exact(&com, &scheme, &fixed).unwrap(), 0.0);
    }

    #[test]
    fn algorithm_c_regeneration() {
        let com = toy(6);
        let mut rng = SimRng::seed_from_u64(7);
        for _ in 0..50 {
            let (y, s2, s2b) = algorithm_c_com(&com, Regeneration::Committed, &mut rng).unwrap();
            assert!(com.r2(&y, &s2, false));
            assert!(!com.r2(&y, &s2b, true));
        }
        // some y has only even-parity preimages with this table
        let lonely = com
            .parity_counts()
            .into_iter()
            .find(|(_, [_, b])| *b == 0)
            .map(|(y, _)| bits(y, 2));
        if let Some(y) = lonely {
            let second = com.opening_law(true, true).unwrap();
            assert!(matches!(second.condition(&y), Err(Error::ImpossibleCondition(_))));
        }
        let law = algorithm_c_com_law(&com, Regeneration::Committed).unwrap();
        let s1 = law.marginal_prefix(2).unwrap();
        assert!(s1.sd(&com.s1_law(false).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn b_independent_sender_state() {
        // ψ_S given s_1 does not depend on b; S_2 reveals b
        let s1 = FiniteDist::uniform(1);
        let laws = [
            s1.product(&FiniteDist::point(bits(0, 1))).unwrap(),
            s1.product(&FiniteDist::point(bits(1, 1))).unwrap(),
        ];
        let com = AbstractCommitment { s1_len: 1, laws };
        let law = algorithm_c_com_law(&com, Regeneration::Opening).unwrap();
        let mut win = 0.0;
        for (t, p) in law.iter() {
            if com.r2(&t.prefix(1), &t.slice(1, 2), false) && com.r2(&t.prefix(1), &t.suffix(2), true) {
                win += p;
            }
        }
        assert!((win - 1.0).abs() < 1e-12);
        let audit = hiding_and_correctness_audit(&com, 0.1).unwrap();
        assert_eq!(audit.hiding_sd, 0.0);
        assert_eq!(audit.correctness, [1.0, 1.0]);
        assert!((audit.lemma_bound - 0.81).abs() < 1e-12);
        assert!(audit.bound_holds);
    }

    #[test]
    fn audit_of_toy() {
        let com = toy(8);
        let audit = hiding_and_correctness_audit(&com, 0.1).unwrap();
        assert!(audit.correctness.iter().all(|c| (c - 1.0).abs() < 1e-12));
        assert!(audit.hiding_sd > 0.0 && audit.hiding_sd <= 1.0);
        assert!(audit.bound_holds);
        let mut rng = SimRng::seed_from_u64(9);
        let mut hits = 0;
        for _ in 0..4000 {
            match algorithm_c_com(&com, Regeneration::Opening, &mut rng) {
                Ok((y, s2, s2b)) => {
                    hits += (com.r2(&y, &s2, false) && com.r2(&y, &s2b, true)) as u32;
                }
                Err(Error::ImpossibleCondition(_)) => {}
                Err(e) => panic!("{e}"),
            }
        }
        assert!((hits as f64 / 4000.0 - audit.algorithm_c_value).abs() < 0.03);
        let all = hiding_and_correctness_audit(&com, 1.0).unwrap();
        assert!(all.per_s1.iter().all(|v| v.in_g == [true, true]));
        assert_eq!(all.lemma_bound, 0.0);
    }

    #[test]
    fn caps_and_variants() {
        let mut rng = SimRng::seed_from_u64(0);
        assert!(ToyCommitment::toy(3, 3, &mut rng).is_err());
        assert!(matches!(
            ToyCommitment::toy(5, 1, &mut rng),
            Err(Error::InstanceTooLarge { .. })
        ));
        assert_eq!("coherent".parse::<ComVariant>().unwrap(), ComVariant::Coherent);
        assert!("other".parse::<ComVariant>().is_err());
    }
}
