use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::adversary::{checked_guess, checked_law, AdvContext, Adversary};
use crate::bits::BitString;
use crate::dist::{DistBuilder, FiniteDist};
use crate::error::{Error, Result};
use crate::ncmo::{
    adaptive_session, branch_law, oracle_exact_from, q_t_exact_from, session_law, OracleBackend,
    OracleOutput, PdqpInstanceFamily,
};
use crate::qsim::{sample_outcome, Circuit};
use crate::SimRng;

fn check_k(ctx: &AdvContext, k: usize) -> Result<()> {
    if k > ctx.circuit.len() {
        return Err(Error::structural(format!(
            "hybrid index {k} outside 0..={}",
            ctx.circuit.len()
        )));
    }
    Ok(())
}

/// `B(k)`: one Born-rule branch; reads `1..=k` are genuine and the rest are
/// `u_i ‖ A(x, i, τ_i)`.
pub fn hybrid_b(
    k: usize,
    ctx: &AdvContext,
    adv: &dyn Adversary,
    rng: &mut SimRng,
) -> Result<OracleOutput> {
    check_k(ctx, k)?;
    let tree = &ctx.tree;
    let mut id = 0;
    let mut reads = Vec::with_capacity(ctx.circuit.len());
    for t in 1..=ctx.circuit.len() {
        let node = tree.node(id);
        let weights: Vec<f64> = node
            .children
            .iter()
            .map(|&c| tree.node(c).prob / node.prob)
            .collect();
        id = node.children[sample_outcome(&weights, rng)];
        let node = tree.node(id);
        let v = if t <= k {
            node.state.sample_readout(rng)
        } else {
            let u = node.transcript.outcomes()[t - 1];
            u.concat(&checked_guess(adv, ctx, t, &node.transcript, rng)?)?
        };
        reads.push(v);
    }
    Ok(OracleOutput {
        reads,
        measures: ctx.circuit.measures(),
    })
}

/// Exact law of `B(k)` over the concatenated reads.
pub fn hybrid_b_exact(k: usize, ctx: &AdvContext, adv: &dyn Adversary) -> Result<FiniteDist> {
    check_k(ctx, k)?;
    let len = ctx.circuit.len() * ctx.circuit.qubits();
    branch_law(&ctx.tree, len, &|t, node| {
        if t <= k {
            Ok(node.readout.clone())
        } else {
            let u = node.transcript.outcomes()[t - 1];
            FiniteDist::point(u).product(&checked_law(adv, ctx, t, &node.transcript)?)
        }
    })
}

/// `Q*`: every read completed by the adversary.
pub fn q_star(ctx: &AdvContext, adv: &dyn Adversary, rng: &mut SimRng) -> Result<OracleOutput> {
    hybrid_b(0, ctx, adv, rng)
}

pub fn q_star_exact(ctx: &AdvContext, adv: &dyn Adversary) -> Result<FiniteDist> {
    hybrid_b_exact(0, ctx, adv)
}

/// Law of `(τ_t, A(x, t, τ_t))` over `u_1 ‖ … ‖ u_t ‖ w`.
pub fn adversary_step_law(ctx: &AdvContext, adv: &dyn Adversary, t: usize) -> Result<FiniteDist> {
    ctx.circuit.check_step(t)?;
    let len = ctx.circuit.measured_bits(t) + ctx.w_len(t);
    let mut b = DistBuilder::new(len);
    for &id in ctx.tree.level(t) {
        let n = ctx.tree.node(id);
        let joint = FiniteDist::point(n.transcript.concat()?)
            .product(&checked_law(adv, ctx, t, &n.transcript)?)?;
        b.add_scaled(n.prob, &joint)?;
    }
    b.finish()
}

/// Per-step distances computed two independent ways.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerStepSd {
    /// `SD(B(t−1), B(t))` for `t = 1..=T`.
    pub hybrid: Vec<f64>,
    /// `SD({τ_t, w_t}, {τ_t, A(x, t, τ_t)})` for `t = 1..=T`.
    pub single: Vec<f64>,
}

impl PerStepSd {
    pub fn max_gap(&self) -> f64 {
        self.hybrid
            .iter()
            .zip(&self.single)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn total(&self) -> f64 {
        self.hybrid.iter().sum()
    }
}

pub fn per_step_sd(ctx: &AdvContext, adv: &dyn Adversary) -> Result<PerStepSd> {
    let big_t = ctx.circuit.len();
    let hybrids = (0..=big_t)
        .map(|k| hybrid_b_exact(k, ctx, adv))
        .collect::<Result<Vec<_>>>()?;
    let hybrid = hybrids
        .windows(2)
        .map(|w| w[0].sd(&w[1]))
        .collect::<Result<Vec<_>>>()?;
    let single = (1..=big_t)
        .map(|t| q_t_exact_from(&ctx.tree, t)?.sd(&adversary_step_law(ctx, adv, t)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(PerStepSd { hybrid, single })
}

/// Endpoint and telescoping figures for one instance and adversary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridReport {
    pub adversary: String,
    /// `sd(B(T), Q)`.
    pub endpoint_oracle: f64,
    /// `sd(B(0), Q*)`, with `Q*` computed without the hybrid.
    pub endpoint_q_star: f64,
    pub per_step: PerStepSd,
    /// `sd(Q*, Q)`.
    pub q_star_sd: f64,
    /// `Σ_t per-step − sd(Q*, Q)`; never negative.
    pub telescoping_slack: f64,
}

/// `Q*` law built directly from the branch tree, independent of `B`.
fn q_star_direct(ctx: &AdvContext, adv: &dyn Adversary) -> Result<FiniteDist> {
    let len = ctx.circuit.len() * ctx.circuit.qubits();
    let mut b = DistBuilder::new(len);
    for leaf in ctx.tree.leaves() {
        let mut joint = FiniteDist::point(BitString::EMPTY);
        for t in 1..=ctx.circuit.len() {
            let tau = leaf.transcript.prefix(t);
            let u = tau.outcomes()[t - 1];
            joint = joint.product(&FiniteDist::point(u).product(&checked_law(adv, ctx, t, &tau)?)?)?;
        }
        b.add_scaled(leaf.prob, &joint)?;
    }
    b.finish()
}

pub fn hybrid_report(ctx: &AdvContext, adv: &dyn Adversary) -> Result<HybridReport> {
    let oracle = oracle_exact_from(&ctx.tree)?;
    let b_top = hybrid_b_exact(ctx.circuit.len(), ctx, adv)?;
    let b_zero = hybrid_b_exact(0, ctx, adv)?;
    let direct = q_star_direct(ctx, adv)?;
    let per_step = per_step_sd(ctx, adv)?;
    let q_star_sd = direct.sd(&oracle)?;
    Ok(HybridReport {
        adversary: adv.kind().to_string(),
        endpoint_oracle: b_top.sd(&oracle)?,
        endpoint_q_star: b_zero.sd(&direct)?,
        telescoping_slack: per_step.total() - q_star_sd,
        per_step,
        q_star_sd,
    })
}

/// Answers each query with `Q*` for a fixed instance and adversary.
#[derive(Clone)]
pub struct QStarBackend {
    pub x: BitString,
    pub adv: Arc<dyn Adversary>,
}

impl OracleBackend for QStarBackend {
    fn name(&self) -> String {
        format!("q-star/{}", self.adv.kind())
    }

    fn query(&self, c: &Circuit, _accuracy: f64, rng: &mut SimRng) -> Result<OracleOutput> {
        let ctx = AdvContext::new(self.x, c.clone())?;
        q_star(&ctx, self.adv.as_ref(), rng)
    }

    fn law(&self, c: &Circuit, _accuracy: f64) -> Result<FiniteDist> {
        let ctx = AdvContext::new(self.x, c.clone())?;
        q_star_exact(&ctx, self.adv.as_ref())
    }
}

fn require_single_query(fam: &PdqpInstanceFamily) -> Result<()> {
    if fam.machine.query_bound() > 1 {
        return Err(Error::structural(format!(
            "solver needs a single-query machine, bound is {}",
            fam.machine.query_bound()
        )));
    }
    Ok(())
}

/// `F`: the base machine run against `Q*`.
pub fn solver_f(
    fam: &PdqpInstanceFamily,
    x: &BitString,
    eps: f64,
    adv: Arc<dyn Adversary>,
    rng: &mut SimRng,
) -> Result<BitString> {
    require_single_query(fam)?;
    let backend = QStarBackend { x: *x, adv };
    adaptive_session(fam.machine.as_ref(), x, eps, &backend, rng)
}

pub fn solver_law(
    fam: &PdqpInstanceFamily,
    x: &BitString,
    eps: f64,
    adv: Arc<dyn Adversary>,
) -> Result<FiniteDist> {
    require_single_query(fam)?;
    let backend = QStarBackend { x: *x, adv };
    session_law(fam.machine.as_ref(), x, eps, &backend)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::empirical;
    use crate::ncmo::{FnMachine, TrueOracle};
    use crate::puzzles::adversary::{Custom, Oblivious, Perfect, Rejection};
    use crate::qsim::{bell_circuit, random_circuit, Gate, Step};
    use rand::SeedableRng;

    fn adversaries() -> Vec<Arc<dyn Adversary>> {
        vec![
            Arc::new(Perfect),
            Arc::new(Oblivious),
            Arc::new(Rejection { budget: 2 }),
            Arc::new(Custom::zeros()),
        ]
    }

    #[test]
    fn endpoints_and_identity_on_random_circuits() {
        let mut rng = SimRng::seed_from_u64(21);
        for _ in 0..8 {
            let c = random_circuit(2, 3, &mut rng).unwrap();
            let ctx = AdvContext::new(BitString::EMPTY, c).unwrap();
            for adv in adversaries() {
                let r = hybrid_report(&ctx, adv.as_ref()).unwrap();
                assert!(r.endpoint_oracle < 1e-9);
                assert!(r.endpoint_q_star < 1e-9);
                assert!(r.per_step.max_gap() < 1e-9, "{:?}", r.per_step);
                assert!(r.telescoping_slack > -1e-9);
            }
        }
    }

    #[test]
    fn perfect_adversary_is_invisible() {
        let mut rng = SimRng::seed_from_u64(22);
        let c = random_circuit(3, 2, &mut rng).unwrap();
        let ctx = AdvContext::new(BitString::EMPTY, c).unwrap();
        let laws: Vec<_> = (0..=2).map(|k| hybrid_b_exact(k, &ctx, &Perfect).unwrap()).collect();
        for l in &laws[1..] {
            assert!(l.sd(&laws[0]).unwrap() < 1e-9);
        }
        let r = hybrid_report(&ctx, &Perfect).unwrap();
        assert!(r.q_star_sd < 1e-9);
        assert!(r.per_step.total() < 1e-9);
    }

    #[test]
    fn oblivious_on_measured_bell() {
        let ctx = AdvContext::new(BitString::EMPTY, bell_circuit(1, None)).unwrap();
        let r = per_step_sd(&ctx, &Oblivious).unwrap();
        // honest (u, u) against (u, uniform): half the mass moves
        assert!((r.hybrid[0] - 0.5).abs() < 1e-12);
        assert!((r.single[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hybrid_sampling_matches_law() {
        let mut rng = SimRng::seed_from_u64(23);
        let c = random_circuit(2, 2, &mut rng).unwrap();
        let ctx = AdvContext::new(BitString::EMPTY, c).unwrap();
        for k in 0..=2 {
            let law = hybrid_b_exact(k, &ctx, &Oblivious).unwrap();
            let draws: Vec<_> = (0..40_000)
                .map(|_| hybrid_b(k, &ctx, &Oblivious, &mut rng).unwrap().concat())
                .collect();
            let (_, emp) = empirical(&draws).unwrap();
            assert!(emp.sd(&law).unwrap() < 0.02);
        }
    }

    #[test]
    fn wrong_length_guess_is_protocol_error() {
        let ctx = AdvContext::new(BitString::EMPTY, bell_circuit(1, None)).unwrap();
        let bad = Custom::new("long", |_, _, _| Ok(FiniteDist::uniform(3)));
        assert!(matches!(
            hybrid_b_exact(0, &ctx, &bad),
            Err(Error::Protocol(_))
        ));
        let mut rng = SimRng::seed_from_u64(24);
        assert!(matches!(
            hybrid_b(0, &ctx, &bad, &mut rng),
            Err(Error::Protocol(_))
        ));
        assert!(hybrid_b(3, &ctx, &bad, &mut rng).is_err());
    }

    #[test]
    fn solver_data_processing() {
        let mut rng = SimRng::seed_from_u64(25);
        let c = random_circuit(2, 2, &mut rng).unwrap();
        let cc = c.clone();
        let machine = FnMachine::non_adaptive(
            Some(1),
            move |_, _| Ok(cc.clone()),
            |o| BitString::from_index((o.concat().count_ones() % 2) as usize, 1),
        );
        let fam = PdqpInstanceFamily::new(Arc::new(machine), |_| Ok(FiniteDist::uniform(1)));
        let x: BitString = "0".parse().unwrap();
        let truth = session_law(fam.machine.as_ref(), &x, 0.1, &TrueOracle).unwrap();
        let ctx = AdvContext::new(x, c).unwrap();
        for adv in adversaries() {
            let law = solver_law(&fam, &x, 0.1, adv.clone()).unwrap();
            let q = q_star_exact(&ctx, adv.as_ref()).unwrap();
            let backend_gap = q.sd(&oracle_exact_from(&ctx.tree).unwrap()).unwrap();
            assert!(law.sd(&truth).unwrap() <= backend_gap + 1e-9);
        }
        let perfect = solver_law(&fam, &x, 0.1, Arc::new(Perfect)).unwrap();
        assert!(perfect.sd(&truth).unwrap() < 1e-9);
        let y = solver_f(&fam, &x, 0.1, Arc::new(Perfect), &mut rng).unwrap();
        assert_eq!(y.len(), 1);
    }

    #[test]
    fn zero_query_solver() {
        let m = FnMachine::new(0, Some(2), |_, _, _| {
            Ok(crate::ncmo::MachineStep::Output("10".parse().unwrap()))
        });
        let fam = PdqpInstanceFamily::new(Arc::new(m), |_| Ok(FiniteDist::uniform(1)));
        let mut rng = SimRng::seed_from_u64(26);
        let y = solver_f(&fam, &BitString::EMPTY, 0.1, Arc::new(Oblivious), &mut rng).unwrap();
        assert_eq!(y.to_string(), "10");
    }

    #[test]
    fn deterministic_circuit_replay() {
        let c = Circuit::new(2, vec![Step::new(vec![Gate::X(1)], 1)]).unwrap();
        let ctx = AdvContext::new(BitString::EMPTY, c).unwrap();
        let replay = Custom::new("replay", |_, _, _| Ok(FiniteDist::point("1".parse().unwrap())));
        let r = hybrid_report(&ctx, &replay).unwrap();
        assert!(r.q_star_sd < 1e-12);
    }
}
