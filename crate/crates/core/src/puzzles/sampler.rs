//! Puzzle samplers and advantage measurement.
//!
//! Puzzles produced from an instance family use a fixed-width encoding:
//!
//! ```text
//! puzz = len8(x) ‖ x ‖ t8 ‖ u_1 ‖ … ‖ u_t ‖ 0…0
//! ans  = w_t ‖ 0…0
//! ```
//!
//! `len8` and `t8` are 8-bit big-endian integers. The trailing zeros pad
//! every puzzle to the width needed by the longest `x` and transcript of the
//! family, and every answer to the longest `w_t`. The auxiliary-input
//! variant drops `len8(x) ‖ x`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adversary::{checked_law, AdvContext, Adversary};
use super::hybrid::adversary_step_law;
use crate::bits::BitString;
use crate::dist::{empirical, DistBuilder, FiniteDist};
use crate::error::{Error, Result};
use crate::ncmo::{q_t_exact_from, PdqpInstanceFamily};
use crate::qsim::{run_prefix, sample_outcome, Circuit, Transcript};
use crate::SimRng;

pub const LEN_WIDTH: usize = 8;
pub const STEP_WIDTH: usize = 8;

/// Draws `(puzz, ans)` pairs of fixed lengths.
pub trait PuzzleSampler: Send + Sync {
    fn puzz_len(&self) -> usize;
    fn ans_len(&self) -> usize;
    fn sample(&self, rng: &mut SimRng) -> Result<(BitString, BitString)>;
    /// Exact law over `puzz ‖ ans`.
    fn exact_law(&self) -> Result<FiniteDist>;
}

/// Sampler given directly by its joint law.
#[derive(Clone, Debug)]
pub struct LawPuzzle {
    pub puzz_len: usize,
    pub law: FiniteDist,
}

impl LawPuzzle {
    pub fn new(puzz_len: usize, law: FiniteDist) -> Result<Self> {
        if puzz_len > law.bit_len() {
            return Err(Error::structural("puzzle part longer than the joint string"));
        }
        Ok(LawPuzzle { puzz_len, law })
    }
}

impl PuzzleSampler for LawPuzzle {
    fn puzz_len(&self) -> usize {
        self.puzz_len
    }

    fn ans_len(&self) -> usize {
        self.law.bit_len() - self.puzz_len
    }

    fn sample(&self, rng: &mut SimRng) -> Result<(BitString, BitString)> {
        let s = self.law.sample(rng);
        Ok((s.prefix(self.puzz_len), s.suffix(self.puzz_len)))
    }

    fn exact_law(&self) -> Result<FiniteDist> {
        Ok(self.law.clone())
    }
}

fn encode_byte(n: usize, what: &str) -> Result<BitString> {
    if n >= 1 << 8 {
        return Err(Error::too_large(what.to_string(), 255));
    }
    Ok(BitString::from_index(n, 8))
}

/// `z = len8(x) ‖ x ‖ 1^k` for accuracy `ε = 1/k`.
pub fn encode_aux_input(x: &BitString, k: usize) -> Result<BitString> {
    if k == 0 {
        return Err(Error::structural("accuracy string must be nonempty"));
    }
    let ones = BitString::from_value(u128::MAX >> (128 - k.min(128)), k)?;
    BitString::concat_all(&[encode_byte(x.len(), "instance length")?, *x, ones])
}

/// Parses `z` into `(x, ε)`.
pub fn parse_aux_input(z: &BitString) -> Result<(BitString, f64)> {
    if z.len() < LEN_WIDTH {
        return Err(Error::Parse(format!("auxiliary input {z} lacks a length header")));
    }
    let n = z.prefix(LEN_WIDTH).index();
    if z.len() < LEN_WIDTH + n + 1 {
        return Err(Error::Parse(format!(
            "auxiliary input {z} too short for a {n}-bit instance and accuracy"
        )));
    }
    let x = z.slice(LEN_WIDTH, LEN_WIDTH + n);
    let unary = z.suffix(LEN_WIDTH + n);
    if unary.count_ones() as usize != unary.len() {
        return Err(Error::Parse(format!("accuracy part {unary} is not unary")));
    }
    Ok((x, 1.0 / unary.len() as f64))
}

#[derive(Clone, Debug)]
struct Entry {
    weight: f64,
    ctx: AdvContext,
}

/// `(puzz, ans) = ((x, t, τ_t), w_t)` drawn from circuits of an instance
/// family.
#[derive(Clone, Debug)]
pub struct InstancePuzzle {
    entries: Vec<Entry>,
    by_x: BTreeMap<BitString, usize>,
    with_x: bool,
    x_width: usize,
    tau_width: usize,
    ans_len: usize,
}

impl InstancePuzzle {
    /// Builds the sampler from weighted `(x, C_x)` pairs.
    pub fn from_instances(
        instances: impl IntoIterator<Item = (f64, BitString, Circuit)>,
        with_x: bool,
    ) -> Result<Self> {
        let mut entries = Vec::new();
        let mut by_x = BTreeMap::new();
        for (weight, x, c) in instances {
            if by_x.insert(x, entries.len()).is_some() {
                return Err(Error::structural(format!("instance {x} listed twice")));
            }
            if c.len() >= 1 << STEP_WIDTH {
                return Err(Error::too_large("circuit steps", 255));
            }
            encode_byte(x.len(), "instance length")?;
            entries.push(Entry {
                weight,
                ctx: AdvContext::new(x, c)?,
            });
        }
        if entries.is_empty() {
            return Err(Error::structural("empty circuit family"));
        }
        let x_width = entries.iter().map(|e| e.ctx.x.len()).max().unwrap_or(0);
        let tau_width = entries
            .iter()
            .flat_map(|e| (1..=e.ctx.circuit.len()).map(|t| e.ctx.circuit.measured_bits(t)))
            .max()
            .unwrap_or(0);
        let ans_len = entries
            .iter()
            .flat_map(|e| (1..=e.ctx.circuit.len()).map(|t| e.ctx.w_len(t)))
            .max()
            .unwrap_or(0);
        let p = InstancePuzzle {
            entries,
            by_x,
            with_x,
            x_width,
            tau_width,
            ans_len,
        };
        if p.puzz_len() + p.ans_len > crate::bits::MAX_BITS {
            return Err(Error::too_large("puzzle bits", crate::bits::MAX_BITS));
        }
        Ok(p)
    }

    /// `Samp(1^λ)` for a single-query family.
    pub fn from_family(fam: &PdqpInstanceFamily, lambda: usize) -> Result<Self> {
        let law = fam.instance_law(lambda)?;
        let items = law
            .iter()
            .map(|(x, p)| Ok((p, *x, fam.circuit(x)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_instances(items, true)
    }

    /// `Samp(z)` with `z = (x, 1^⌊1/ε⌋)`.
    pub fn auxiliary(fam: &PdqpInstanceFamily, z: &BitString) -> Result<Self> {
        let (x, eps) = parse_aux_input(z)?;
        Self::from_instances([(1.0, x, fam.circuit_at(&x, eps)?)], false)
    }

    /// `T′ = max_x T_x`.
    pub fn t_prime(&self) -> usize {
        self.entries.iter().map(|e| e.ctx.circuit.len()).max().unwrap_or(0)
    }

    pub fn contexts(&self) -> impl Iterator<Item = (f64, &AdvContext)> + '_ {
        self.entries.iter().map(|e| (e.weight, &e.ctx))
    }

    /// Width of the `len8(x) ‖ x` header, zero for auxiliary puzzles.
    pub fn header_width(&self) -> usize {
        if self.with_x {
            LEN_WIDTH + self.x_width
        } else {
            0
        }
    }

    pub fn encode_puzz(&self, x: &BitString, t: usize, tau: &BitString) -> Result<BitString> {
        let mut parts = Vec::new();
        if self.with_x {
            parts.push(encode_byte(x.len(), "instance length")?);
            parts.push(*x);
        }
        parts.push(encode_byte(t, "step index")?);
        parts.push(*tau);
        BitString::concat_all(&parts)?.pad_to(self.puzz_len())
    }

    /// Splits a puzzle into its instance context, `t` and `τ_t`.
    pub fn decode_puzz(&self, puzz: &BitString) -> Result<(&AdvContext, usize, Transcript)> {
        if puzz.len() != self.puzz_len() {
            return Err(Error::structural(format!(
                "puzzle of {} bits, expected {}",
                puzz.len(),
                self.puzz_len()
            )));
        }
        let (entry, at) = if self.with_x {
            let n = puzz.prefix(LEN_WIDTH).index();
            if n > self.x_width {
                return Err(Error::Parse(format!("instance length {n} out of range")));
            }
            let x = puzz.slice(LEN_WIDTH, LEN_WIDTH + n);
            let id = self
                .by_x
                .get(&x)
                .ok_or_else(|| Error::Parse(format!("unknown instance {x}")))?;
            (&self.entries[*id], LEN_WIDTH + n)
        } else {
            (&self.entries[0], 0)
        };
        let t = puzz.slice(at, at + STEP_WIDTH).index();
        entry.ctx.circuit.check_step(t)?;
        let start = at + STEP_WIDTH;
        let tau = puzz.slice(start, start + entry.ctx.circuit.measured_bits(t));
        Ok((&entry.ctx, t, Transcript::split(&tau, &entry.ctx.circuit.measures()[..t])?))
    }
}

impl PuzzleSampler for InstancePuzzle {
    fn puzz_len(&self) -> usize {
        self.header_width() + STEP_WIDTH + self.tau_width
    }

    fn ans_len(&self) -> usize {
        self.ans_len
    }

    fn sample(&self, rng: &mut SimRng) -> Result<(BitString, BitString)> {
        let weights: Vec<f64> = self.entries.iter().map(|e| e.weight).collect();
        let ctx = &self.entries[sample_outcome(&weights, rng)].ctx;
        let t = rng.gen_range(1..=ctx.circuit.len());
        let (tau, state) = run_prefix(&ctx.circuit, t, rng)?;
        let w = state.sample_readout(rng).suffix(ctx.circuit.measured(t));
        Ok((
            self.encode_puzz(&ctx.x, t, &tau.concat()?)?,
            w.pad_to(self.ans_len)?,
        ))
    }

    fn exact_law(&self) -> Result<FiniteDist> {
        let mut b = DistBuilder::new(self.puzz_len() + self.ans_len);
        for e in &self.entries {
            let big_t = e.ctx.circuit.len();
            for t in 1..=big_t {
                let mb = e.ctx.circuit.measured_bits(t);
                for (s, p) in q_t_exact_from(&e.ctx.tree, t)?.iter() {
                    let key = self
                        .encode_puzz(&e.ctx.x, t, &s.prefix(mb))?
                        .concat(&s.suffix(mb).pad_to(self.ans_len)?)?;
                    b.add(key, e.weight * p / big_t as f64)?;
                }
            }
        }
        b.finish()
    }
}

/// `Samp(1^λ)`: one draw.
pub fn samp_from_instance(
    fam: &PdqpInstanceFamily,
    lambda: usize,
    rng: &mut SimRng,
) -> Result<(BitString, BitString)> {
    InstancePuzzle::from_family(fam, lambda)?.sample(rng)
}

/// `Samp(z)`: one draw of the auxiliary-input sampler.
pub fn aux_samp(
    z: &BitString,
    fam: &PdqpInstanceFamily,
    rng: &mut SimRng,
) -> Result<(BitString, BitString)> {
    InstancePuzzle::auxiliary(fam, z)?.sample(rng)
}

/// Answers puzzles.
pub trait PuzzleAdversary: Send + Sync {
    fn name(&self) -> String;

    /// Law of the answer to `puzz`.
    fn answer_law(&self, puzz: &BitString) -> Result<FiniteDist>;

    fn answer(&self, puzz: &BitString, rng: &mut SimRng) -> Result<BitString> {
        Ok(self.answer_law(puzz)?.sample(rng))
    }
}

#[derive(Clone, Debug)]
pub struct ConstantAnswer(pub BitString);

impl PuzzleAdversary for ConstantAnswer {
    fn name(&self) -> String {
        format!("constant:{}", self.0)
    }

    fn answer_law(&self, _puzz: &BitString) -> Result<FiniteDist> {
        Ok(FiniteDist::point(self.0))
    }
}

/// Samples `ans` from its exact conditional given `puzz`.
#[derive(Clone, Debug)]
pub struct ExactConditional {
    law: FiniteDist,
}

impl ExactConditional {
    pub fn new(sampler: &dyn PuzzleSampler) -> Result<Self> {
        Ok(ExactConditional {
            law: sampler.exact_law()?,
        })
    }
}

impl PuzzleAdversary for ExactConditional {
    fn name(&self) -> String {
        "exact-conditional".into()
    }

    fn answer_law(&self, puzz: &BitString) -> Result<FiniteDist> {
        self.law.condition(puzz)
    }
}

/// A step adversary answering puzzles of an [`InstancePuzzle`].
#[derive(Clone, Copy)]
pub struct LiftedAdversary<'a> {
    pub puzzle: &'a InstancePuzzle,
    pub adv: &'a dyn Adversary,
}

impl PuzzleAdversary for LiftedAdversary<'_> {
    fn name(&self) -> String {
        self.adv.kind().to_string()
    }

    fn answer_law(&self, puzz: &BitString) -> Result<FiniteDist> {
        let (ctx, t, tau) = self.puzzle.decode_puzz(puzz)?;
        let ans_len = self.puzzle.ans_len();
        checked_law(self.adv, ctx, t, &tau)?.try_push_forward(|w| w.pad_to(ans_len))
    }
}

/// Accepts iff the answer has positive probability given the puzzle.
#[derive(Clone, Debug)]
pub struct SupportVerifier {
    puzz_len: usize,
    law: FiniteDist,
}

impl SupportVerifier {
    pub fn new(sampler: &dyn PuzzleSampler) -> Result<Self> {
        Ok(SupportVerifier {
            puzz_len: sampler.puzz_len(),
            law: sampler.exact_law()?,
        })
    }

    pub fn verify(&self, puzz: &BitString, ans: &BitString) -> bool {
        puzz.len() == self.puzz_len
            && puzz
                .concat(ans)
                .map(|s| self.law.prob(&s) > 0.0)
                .unwrap_or(false)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdvantageMode {
    Exact,
    Empirical { shots: u64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvantageReport {
    pub alpha: f64,
    pub mode: AdvantageMode,
    pub shots: Option<u64>,
    /// `sqrt(k / shots)` with `k` the number of distinct outcomes seen.
    pub margin: Option<f64>,
    /// Contribution of each step to `α`, when the sampler exposes steps.
    pub per_step: Vec<f64>,
}

/// Law of `(puzz, A(puzz))` with `puzz` from the sampler.
pub fn completed_law(sampler: &dyn PuzzleSampler, adv: &dyn PuzzleAdversary) -> Result<FiniteDist> {
    let honest = sampler.exact_law()?;
    let puzzles = honest.marginal_prefix(sampler.puzz_len())?;
    let mut b = DistBuilder::new(honest.bit_len());
    for (puzz, p) in puzzles.iter() {
        let answers = adv.answer_law(puzz)?;
        if answers.bit_len() != sampler.ans_len() {
            return Err(Error::Protocol(format!(
                "adversary {} answered {} bits, expected {}",
                adv.name(),
                answers.bit_len(),
                sampler.ans_len()
            )));
        }
        b.add_scaled(p, &FiniteDist::point(*puzz).product(&answers)?)?;
    }
    b.finish()
}

/// `α = SD({puzz, ans}, {puzz, A(puzz)})`.
pub fn advantage(
    sampler: &dyn PuzzleSampler,
    adv: &dyn PuzzleAdversary,
    mode: AdvantageMode,
) -> Result<AdvantageReport> {
    match mode {
        AdvantageMode::Exact => {
            let alpha = sampler.exact_law()?.sd(&completed_law(sampler, adv)?)?;
            Ok(AdvantageReport {
                alpha,
                mode,
                shots: None,
                margin: None,
                per_step: Vec::new(),
            })
        }
        AdvantageMode::Empirical { shots, seed } => {
            use rand::SeedableRng;
            if shots == 0 {
                return Err(Error::structural("empirical advantage needs shots"));
            }
            let mut rng = SimRng::seed_from_u64(seed);
            let mut honest = Vec::with_capacity(shots as usize);
            let mut completed = Vec::with_capacity(shots as usize);
            for _ in 0..shots {
                let (p, a) = sampler.sample(&mut rng)?;
                honest.push(p.concat(&a)?);
                let (p, _) = sampler.sample(&mut rng)?;
                completed.push(p.concat(&adv.answer(&p, &mut rng)?)?);
            }
            let (he, hd) = empirical(&honest)?;
            let (ce, cd) = empirical(&completed)?;
            let seen: std::collections::BTreeSet<_> =
                he.counts().chain(ce.counts()).map(|(s, _)| *s).collect();
            Ok(AdvantageReport {
                alpha: hd.sd(&cd)?,
                mode,
                shots: Some(shots),
                margin: Some((seen.len() as f64 / shots as f64).sqrt()),
                per_step: Vec::new(),
            })
        }
    }
}

/// Exact advantage of a step adversary against an instance puzzle, with
/// the per-step breakdown `Σ_x q_x / T_x · SD({τ_t, w_t}, {τ_t, A})`.
pub fn instance_advantage(puzzle: &InstancePuzzle, adv: &dyn Adversary) -> Result<AdvantageReport> {
    let lifted = LiftedAdversary { puzzle, adv };
    let mut report = advantage(puzzle, &lifted, AdvantageMode::Exact)?;
    let mut per_step = vec![0.0; puzzle.t_prime()];
    for (q, ctx) in puzzle.contexts() {
        let big_t = ctx.circuit.len() as f64;
        for t in 1..=ctx.circuit.len() {
            let d = q_t_exact_from(&ctx.tree, t)?.sd(&adversary_step_law(ctx, adv, t)?)?;
            per_step[t - 1] += q * d / big_t;
        }
    }
    report.per_step = per_step;
    Ok(report)
}
