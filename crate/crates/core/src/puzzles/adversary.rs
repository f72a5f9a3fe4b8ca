use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::dist::{DistBuilder, FiniteDist};
use crate::error::{Error, Result};
use crate::qsim::{enumerate_branches, run_prefix, BranchTree, Circuit, Transcript};
use crate::SimRng;

/// Instance `x`, its circuit and the circuit's branch tree.
#[derive(Clone, Debug)]
pub struct AdvContext {
    pub x: BitString,
    pub circuit: Circuit,
    pub tree: BranchTree,
}

impl AdvContext {
    pub fn new(x: BitString, circuit: Circuit) -> Result<Self> {
        let tree = enumerate_branches(&circuit)?;
        Ok(AdvContext { x, circuit, tree })
    }

    /// `ℓ − m_t`.
    pub fn w_len(&self, t: usize) -> usize {
        self.circuit.qubits() - self.circuit.measured(t)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdversaryKind {
    Perfect,
    Rejection(u64),
    Oblivious,
    Custom(String),
}

impl fmt::Display for AdversaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversaryKind::Perfect => f.write_str("perfect"),
            AdversaryKind::Rejection(b) => write!(f, "rejection:{b}"),
            AdversaryKind::Oblivious => f.write_str("oblivious"),
            AdversaryKind::Custom(name) => write!(f, "custom:{name}"),
        }
    }
}

impl FromStr for AdversaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perfect" => Ok(AdversaryKind::Perfect),
            "oblivious" => Ok(AdversaryKind::Oblivious),
            _ => match s.strip_prefix("rejection:") {
                Some(b) => b
                    .parse()
                    .map(AdversaryKind::Rejection)
                    .map_err(|_| Error::Parse(format!("bad rejection budget {b:?}"))),
                None => Err(Error::Parse(format!(
                    "unknown adversary {s:?}; expected perfect, oblivious or rejection:<budget>"
                ))),
            },
        }
    }
}

/// Guesses `w_t` from `(x, t, τ_t)`.
pub trait Adversary: Send + Sync {
    fn kind(&self) -> AdversaryKind;

    /// Exact law of the guess, over strings of length `ℓ − m_t`.
    fn law(&self, ctx: &AdvContext, t: usize, tau: &Transcript) -> Result<FiniteDist>;

    fn guess(
        &self,
        ctx: &AdvContext,
        t: usize,
        tau: &Transcript,
        rng: &mut SimRng,
    ) -> Result<BitString> {
        Ok(self.law(ctx, t, tau)?.sample(rng))
    }
}

/// Exact readout conditional taken from the branch tree.
#[derive(Clone, Copy, Debug, Default)]
pub struct Perfect;

impl Adversary for Perfect {
    fn kind(&self) -> AdversaryKind {
        AdversaryKind::Perfect
    }

    fn law(&self, ctx: &AdvContext, t: usize, tau: &Transcript) -> Result<FiniteDist> {
        let node = ctx.tree.require(tau)?;
        let m = ctx.circuit.measured(t);
        node.readout.push_forward(|v| v.suffix(m))
    }
}

/// Reruns the prefix up to `budget` times until `τ_t` reappears, then reads
/// the fresh state; gives up with all zeros.
#[derive(Clone, Copy, Debug)]
pub struct Rejection {
    pub budget: u64,
}

impl Adversary for Rejection {
    fn kind(&self) -> AdversaryKind {
        AdversaryKind::Rejection(self.budget)
    }

    fn law(&self, ctx: &AdvContext, t: usize, tau: &Transcript) -> Result<FiniteDist> {
        let zeros = FiniteDist::point(BitString::zeros(ctx.w_len(t)));
        let Some(node) = ctx.tree.find(tau) else {
            return Ok(zeros);
        };
        let fail = (1.0 - node.prob).powf(self.budget as f64);
        let hit = Perfect.law(ctx, t, tau)?;
        FiniteDist::mixture(ctx.w_len(t), [(1.0 - fail, &hit), (fail, &zeros)])
    }

    fn guess(
        &self,
        ctx: &AdvContext,
        t: usize,
        tau: &Transcript,
        rng: &mut SimRng,
    ) -> Result<BitString> {
        for _ in 0..self.budget {
            let (found, state) = run_prefix(&ctx.circuit, t, rng)?;
            if found == *tau {
                return Ok(state.sample_readout(rng).suffix(ctx.circuit.measured(t)));
            }
        }
        Ok(BitString::zeros(ctx.w_len(t)))
    }
}

/// Samples `w_t` from its marginal, ignoring `τ_t`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Oblivious;

impl Adversary for Oblivious {
    fn kind(&self) -> AdversaryKind {
        AdversaryKind::Oblivious
    }

    fn law(&self, ctx: &AdvContext, t: usize, _tau: &Transcript) -> Result<FiniteDist> {
        let m = ctx.circuit.measured(t);
        let mut b = DistBuilder::new(ctx.w_len(t));
        for &id in ctx.tree.level(t) {
            let n = ctx.tree.node(id);
            b.add_scaled(n.prob, &n.readout.push_forward(|v| v.suffix(m))?)?;
        }
        b.finish_normalized()
    }
}

type LawFn = dyn Fn(&AdvContext, usize, &Transcript) -> Result<FiniteDist> + Send + Sync;

/// Adversary given by its law.
#[derive(Clone)]
pub struct Custom {
    name: String,
    f: Arc<LawFn>,
}

impl Custom {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&AdvContext, usize, &Transcript) -> Result<FiniteDist> + Send + Sync + 'static,
    ) -> Self {
        Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    /// Always answers `0…0`.
    pub fn zeros() -> Self {
        Custom::new("zeros", |ctx, t, _| {
            Ok(FiniteDist::point(BitString::zeros(ctx.w_len(t))))
        })
    }

    /// Uniform guess.
    pub fn uniform() -> Self {
        Custom::new("uniform", |ctx, t, _| Ok(FiniteDist::uniform(ctx.w_len(t))))
    }
}

impl Adversary for Custom {
    fn kind(&self) -> AdversaryKind {
        AdversaryKind::Custom(self.name.clone())
    }

    fn law(&self, ctx: &AdvContext, t: usize, tau: &Transcript) -> Result<FiniteDist> {
        (self.f)(ctx, t, tau)
    }
}

pub fn make_adversary(kind: &AdversaryKind) -> Result<Arc<dyn Adversary>> {
    Ok(match kind {
        AdversaryKind::Perfect => Arc::new(Perfect),
        AdversaryKind::Oblivious => Arc::new(Oblivious),
        AdversaryKind::Rejection(budget) => Arc::new(Rejection { budget: *budget }),
        AdversaryKind::Custom(name) => match name.as_str() {
            "zeros" => Arc::new(Custom::zeros()),
            "uniform" => Arc::new(Custom::uniform()),
            other => return Err(Error::Parse(format!("unknown custom adversary {other:?}"))),
        },
    })
}

/// Law of the guess with its length checked against the step.
pub(crate) fn checked_law(
    adv: &dyn Adversary,
    ctx: &AdvContext,
    t: usize,
    tau: &Transcript,
) -> Result<FiniteDist> {
    let law = adv.law(ctx, t, tau)?;
    if law.bit_len() != ctx.w_len(t) {
        return Err(Error::Protocol(format!(
            "adversary {} answered {} bits at step {t}, expected {}",
            adv.kind(),
            law.bit_len(),
            ctx.w_len(t)
        )));
    }
    Ok(law)
}

pub(crate) fn checked_guess(
    adv: &dyn Adversary,
    ctx: &AdvContext,
    t: usize,
    tau: &Transcript,
    rng: &mut SimRng,
) -> Result<BitString> {
    let w = adv.guess(ctx, t, tau, rng)?;
    if w.len() != ctx.w_len(t) {
        return Err(Error::Protocol(format!(
            "adversary {} answered {} bits at step {t}, expected {}",
            adv.kind(),
            w.len(),
            ctx.w_len(t)
        )));
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::empirical;
    use crate::qsim::{bell_circuit, random_circuit};
    use rand::SeedableRng;

    #[test]
    fn kinds_parse() {
        assert_eq!("perfect".parse::<AdversaryKind>().unwrap(), AdversaryKind::Perfect);
        assert_eq!(
            "rejection:25".parse::<AdversaryKind>().unwrap(),
            AdversaryKind::Rejection(25)
        );
        assert!("rejection:x".parse::<AdversaryKind>().is_err());
        assert!("psychic".parse::<AdversaryKind>().is_err());
        assert_eq!(AdversaryKind::Rejection(3).to_string(), "rejection:3");
    }

    #[test]
    fn perfect_and_oblivious_on_bell() {
        let ctx = AdvContext::new(BitString::EMPTY, bell_circuit(1, None)).unwrap();
        let tau = Transcript::new(vec!["1".parse().unwrap()]);
        let p = Perfect.law(&ctx, 1, &tau).unwrap();
        assert_eq!(p, FiniteDist::point("1".parse().unwrap()));
        let o = Oblivious.law(&ctx, 1, &tau).unwrap();
        assert!(o.sd(&FiniteDist::uniform(1)).unwrap() < 1e-12);
    }

    #[test]
    fn rejection_law_matches_sampling() {
        let mut rng = SimRng::seed_from_u64(9);
        let c = loop {
            let c = random_circuit(2, 2, &mut rng).unwrap();
            if c.measured(1) == 1 && c.measured(2) == 1 {
                break c;
            }
        };
        let ctx = AdvContext::new(BitString::EMPTY, c).unwrap();
        let adv = Rejection { budget: 2 };
        let id = ctx.tree.level(2)[0];
        let tau = ctx.tree.node(id).transcript.clone();
        let law = adv.law(&ctx, 2, &tau).unwrap();
        let draws: Vec<_> = (0..20_000)
            .map(|_| adv.guess(&ctx, 2, &tau, &mut rng).unwrap())
            .collect();
        let (_, emp) = empirical(&draws).unwrap();
        assert!(emp.sd(&law).unwrap() < 0.02);
    }
}
