use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::dist::{DistBuilder, FiniteDist};
use crate::error::{Error, Result};
use crate::qsim::{
    enumerate_branches, run_prefix, BranchNode, BranchTree, Circuit, StateVector, Transcript,
};

/// Largest joint output, in bits, that exact laws will materialize.
pub const MAX_EXACT_BITS: usize = 20;
pub const DEFAULT_RETRY_BUDGET: u64 = 1_000_000;

/// `(v_1, …, v_T)` with `v_t = u_t ‖ w_t`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OracleOutput {
    pub reads: Vec<BitString>,
    pub measures: Vec<usize>,
}

impl OracleOutput {
    /// Splits a concatenated `v_1 ‖ … ‖ v_T` for circuit `c`.
    pub fn from_concat(bits: &BitString, c: &Circuit) -> Result<OracleOutput> {
        let l = c.qubits();
        if bits.len() != l * c.len() {
            return Err(Error::structural(format!(
                "{} output bits for {} reads of {l} qubits",
                bits.len(),
                c.len()
            )));
        }
        let reads = (0..c.len()).map(|t| bits.slice(t * l, (t + 1) * l)).collect();
        let out = OracleOutput {
            reads,
            measures: c.measures(),
        };
        Ok(out)
    }

    pub fn concat(&self) -> BitString {
        BitString::concat_all(&self.reads).expect("reads fit in a bit string")
    }

    /// `u_t` for `t` in `1..=T`.
    pub fn u(&self, t: usize) -> BitString {
        self.reads[t - 1].prefix(self.measures[t - 1])
    }

    /// `w_t` for `t` in `1..=T`.
    pub fn w(&self, t: usize) -> BitString {
        self.reads[t - 1].suffix(self.measures[t - 1])
    }

    pub fn transcript(&self) -> Transcript {
        Transcript::new((1..=self.reads.len()).map(|t| self.u(t)).collect())
    }
}

/// How `q1` and `q2` realize their conditioning.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Policy {
    /// Exact conditional from the branch tree.
    Exact,
    /// Rerun the oracle until the transcript prefix matches.
    Rejection { budget: u64 },
}

impl Default for Policy {
    fn default() -> Self {
        Policy::Exact
    }
}

impl Policy {
    pub fn rejection() -> Self {
        Policy::Rejection {
            budget: DEFAULT_RETRY_BUDGET,
        }
    }
}

/// One draw from the oracle.
pub fn oracle_sample<R: Rng + ?Sized>(c: &Circuit, rng: &mut R) -> Result<OracleOutput> {
    let mut state = StateVector::zero(c.qubits())?;
    let mut reads = Vec::with_capacity(c.len());
    for step in c.steps() {
        state.apply_gates_unchecked(&step.gates);
        let (u, post, _) = state.measure_collapsing(step.measure, rng)?;
        let v = post.sample_readout(rng);
        assert!(v.starts_with(&u), "read {v} disagrees with collapsing outcome {u}");
        reads.push(v);
        state = post;
    }
    Ok(OracleOutput {
        reads,
        measures: c.measures(),
    })
}

/// Law of `f_1(v_1) ‖ … ‖ f_T(v_T)` where each `read(t, node)` gives the
/// law of the step-`t` image at that branch node. Reads are independent
/// given the branch.
pub fn branch_law(
    tree: &BranchTree,
    out_len: usize,
    read: &dyn Fn(usize, &BranchNode) -> Result<FiniteDist>,
) -> Result<FiniteDist> {
    if out_len > MAX_EXACT_BITS {
        return Err(Error::too_large("exact output bits", MAX_EXACT_BITS));
    }
    let mut acc = DistBuilder::new(out_len);
    fn walk(
        tree: &BranchTree,
        id: usize,
        partial: FiniteDist,
        read: &dyn Fn(usize, &BranchNode) -> Result<FiniteDist>,
        acc: &mut DistBuilder,
    ) -> Result<()> {
        let node = tree.node(id);
        if node.depth == tree.steps() {
            return acc.add_scaled(node.prob, &partial);
        }
        for &child in &node.children {
            let cnode = tree.node(child);
            let r = read(cnode.depth, cnode)?;
            walk(tree, child, partial.product(&r)?, read, acc)?;
        }
        Ok(())
    }
    walk(tree, 0, FiniteDist::point(BitString::EMPTY), read, &mut acc)?;
    acc.finish()
}

/// Exact joint law of `v_1 ‖ … ‖ v_T`.
pub fn oracle_exact(c: &Circuit) -> Result<FiniteDist> {
    let bits = c.len() * c.qubits();
    if bits > MAX_EXACT_BITS {
        return Err(Error::too_large("oracle output bits", MAX_EXACT_BITS));
    }
    let tree = enumerate_branches(c)?;
    oracle_exact_from(&tree)
}

pub fn oracle_exact_from(tree: &BranchTree) -> Result<FiniteDist> {
    branch_law(tree, tree.steps() * tree.qubits(), &|_, n| Ok(n.readout.clone()))
}

/// `Q^t`: returns `(τ_t, w_t)`.
pub fn q_t<R: Rng + ?Sized>(c: &Circuit, t: usize, rng: &mut R) -> Result<(Transcript, BitString)> {
    let (tau, state) = run_prefix(c, t, rng)?;
    let v = state.sample_readout(rng);
    Ok((tau, v.suffix(c.measured(t))))
}

/// Exact law of `Q^t` over `u_1 ‖ … ‖ u_t ‖ w_t`.
pub fn q_t_exact(c: &Circuit, t: usize) -> Result<FiniteDist> {
    c.check_step(t)?;
    let tree = enumerate_branches(c)?;
    q_t_exact_from(&tree, t)
}

pub fn q_t_exact_from(tree: &BranchTree, t: usize) -> Result<FiniteDist> {
    let m: usize = tree.measures()[..t].iter().sum();
    let len = m + tree.qubits() - tree.measures()[t - 1];
    let mut b = DistBuilder::new(len);
    for &id in tree.level(t) {
        let n = tree.node(id);
        let tau = n.transcript.concat()?;
        let w = n.readout.push_forward(|v| v.suffix(tree.measures()[t - 1]))?;
        let joint = FiniteDist::point(tau).product(&w)?;
        b.add_scaled(n.prob, &joint)?;
    }
    b.finish()
}

fn reject_until<R: Rng + ?Sized, T>(
    c: &Circuit,
    tau: &Transcript,
    budget: u64,
    rng: &mut R,
    take: impl Fn(&OracleOutput) -> T,
) -> Result<T> {
    for _ in 0..budget {
        let out = oracle_sample(c, rng)?;
        if (1..=tau.len()).all(|i| out.u(i) == tau.outcomes()[i - 1]) {
            return Ok(take(&out));
        }
    }
    Err(Error::RetryBudgetExhausted { budget })
}

/// `Q_1`: remaining collapsing outcomes `(u_{t+1}, …, u_T)` given `τ_t`.
pub fn q1<R: Rng + ?Sized>(
    c: &Circuit,
    tau: &Transcript,
    rng: &mut R,
    policy: Policy,
) -> Result<Vec<BitString>> {
    c.check_transcript(tau)?;
    let tree = enumerate_branches(c)?;
    let start = tree.find_id(tau).ok_or_else(|| {
        Error::ImpossibleCondition(format!("transcript {tau} has probability zero"))
    })?;
    match policy {
        Policy::Exact => {
            let mut id = start;
            let mut out = Vec::new();
            while !tree.node(id).children.is_empty() {
                let node = tree.node(id);
                let weights: Vec<f64> = node.children.iter().map(|&k| tree.node(k).prob / node.prob).collect();
                let pick = crate::qsim::sample_outcome(&weights, rng);
                id = node.children[pick];
                let child = tree.node(id);
                out.push(child.transcript.outcomes()[child.depth - 1]);
            }
            Ok(out)
        }
        Policy::Rejection { budget } => reject_until(c, tau, budget, rng, |o| {
            (tau.len() + 1..=c.len()).map(|i| o.u(i)).collect()
        }),
    }
}

/// Exact law of `Q_1` over `u_{t+1} ‖ … ‖ u_T`.
pub fn q1_law(c: &Circuit, tau: &Transcript) -> Result<FiniteDist> {
    c.check_transcript(tau)?;
    let tree = enumerate_branches(c)?;
    let node = tree.require(tau)?;
    let start = node.transcript.concat()?.len();
    let len = c.measured_bits(c.len()) - start;
    let mut b = DistBuilder::new(len);
    for leaf in tree.leaves() {
        if leaf.transcript.prefix(tau.len()) == *tau {
            b.add(leaf.transcript.concat()?.suffix(start), leaf.prob / node.prob)?;
        }
    }
    b.finish_normalized()
}

/// `Q_2`: non-collapsing suffixes `(w_1, …, w_t)` given `τ_t`.
pub fn q2<R: Rng + ?Sized>(
    c: &Circuit,
    tau: &Transcript,
    rng: &mut R,
    policy: Policy,
) -> Result<Vec<BitString>> {
    c.check_transcript(tau)?;
    let tree = enumerate_branches(c)?;
    let id = tree.find_id(tau).ok_or_else(|| {
        Error::ImpossibleCondition(format!("transcript {tau} has probability zero"))
    })?;
    match policy {
        Policy::Exact => Ok(tree
            .path(id)
            .into_iter()
            .map(|k| {
                let n = tree.node(k);
                n.state.sample_readout(rng).suffix(n.transcript.outcomes()[n.depth - 1].len())
            })
            .collect()),
        Policy::Rejection { budget } => reject_until(c, tau, budget, rng, |o| {
            (1..=tau.len()).map(|i| o.w(i)).collect()
        }),
    }
}

/// Exact law of `Q_2` over `w_1 ‖ … ‖ w_t`.
pub fn q2_law(c: &Circuit, tau: &Transcript) -> Result<FiniteDist> {
    c.check_transcript(tau)?;
    let tree = enumerate_branches(c)?;
    let id = tree.require(tau).map(|_| tree.find_id(tau).unwrap())?;
    let mut law = FiniteDist::point(BitString::EMPTY);
    for k in tree.path(id) {
        let n = tree.node(k);
        let m = n.transcript.outcomes()[n.depth - 1].len();
        law = law.product(&n.readout.push_forward(|v| v.suffix(m))?)?;
    }
    Ok(law)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::empirical;
    use crate::qsim::{bell_circuit, random_circuit, Gate, Step};
    use crate::SimRng;
    use rand::SeedableRng;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn hadamard() -> Circuit {
        Circuit::new(1, vec![Step::new(vec![Gate::H(0)], 0)]).unwrap()
    }

    #[test]
    fn hadamard_read_is_uniform() {
        let law = oracle_exact(&hadamard()).unwrap();
        assert!(law.sd(&FiniteDist::uniform(1)).unwrap() < 1e-12);
    }

    #[test]
    fn identity_circuit_is_point_mass() {
        let c = Circuit::new(2, vec![Step::measure_only(0); 3]).unwrap();
        assert_eq!(oracle_exact(&c).unwrap(), FiniteDist::point(BitString::zeros(6)));
    }

    #[test]
    fn bell_reads_are_independent() {
        let law = oracle_exact(&bell_circuit(0, Some(0))).unwrap();
        assert_eq!(law.support_size(), 4);
        for s in ["0000", "0011", "1100", "1111"] {
            assert!((law.prob(&bs(s)) - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn measured_bell_reads_agree() {
        let c = bell_circuit(1, Some(0));
        let law = oracle_exact(&c).unwrap();
        assert!((law.prob(&bs("0000")) - 0.5).abs() < 1e-12);
        assert!((law.prob(&bs("1111")) - 0.5).abs() < 1e-12);
        let mut rng = SimRng::seed_from_u64(1);
        for _ in 0..50 {
            let o = oracle_sample(&c, &mut rng).unwrap();
            assert_eq!(o.reads[0], o.reads[1]);
            assert_eq!(o.reads[0].prefix(1), o.u(1));
        }
    }

    #[test]
    fn guard_on_exact_output() {
        let c = Circuit::new(11, vec![Step::measure_only(0); 2]).unwrap();
        assert!(matches!(
            oracle_exact(&c),
            Err(Error::InstanceTooLarge { bound: 20, .. })
        ));
    }

    #[test]
    fn sampling_matches_exact() {
        let mut rng = SimRng::seed_from_u64(2);
        let c = random_circuit(2, 2, &mut rng).unwrap();
        let law = oracle_exact(&c).unwrap();
        let draws: Vec<_> = (0..100_000)
            .map(|_| oracle_sample(&c, &mut rng).unwrap().concat())
            .collect();
        let (_, emp) = empirical(&draws).unwrap();
        assert!(emp.sd(&law).unwrap() <= 0.01);
    }

    #[test]
    fn q_t_marginal_of_oracle() {
        let mut rng = SimRng::seed_from_u64(3);
        for _ in 0..5 {
            let c = random_circuit(3, 3, &mut rng).unwrap();
            let joint = oracle_exact(&c).unwrap();
            let l = c.qubits();
            for t in 1..=c.len() {
                let measures = c.measures();
                let projected = joint
                    .push_forward(|v| {
                        let mut out = BitString::EMPTY;
                        for i in 0..t {
                            let r = v.slice(i * l, (i + 1) * l);
                            out = out.concat(&r.prefix(measures[i])).unwrap();
                        }
                        let r = v.slice((t - 1) * l, t * l);
                        out.concat(&r.suffix(measures[t - 1])).unwrap()
                    })
                    .unwrap();
                let q = q_t_exact(&c, t).unwrap();
                assert!(q.sd(&projected).unwrap() < 1e-9);
            }
        }
    }

    #[test]
    fn q_t_on_measured_bell() {
        let c = bell_circuit(1, None);
        let mut rng = SimRng::seed_from_u64(4);
        for _ in 0..20 {
            let (tau, w) = q_t(&c, 1, &mut rng).unwrap();
            assert_eq!(tau.outcomes()[0], w);
        }
    }

    #[test]
    fn q1_and_q2_conditionals() {
        let c = bell_circuit(1, Some(1));
        let tau = Transcript::new(vec![bs("1")]);
        let mut rng = SimRng::seed_from_u64(5);
        assert_eq!(q1(&c, &tau, &mut rng, Policy::Exact).unwrap(), vec![bs("1")]);
        assert_eq!(q2(&c, &tau, &mut rng, Policy::Exact).unwrap(), vec![bs("1")]);
        assert_eq!(
            q1(&c, &Transcript::new(vec![bs("0"), bs("0")]), &mut rng, Policy::Exact).unwrap(),
            Vec::<BitString>::new()
        );
        assert_eq!(q2(&c, &tau, &mut rng, Policy::rejection()).unwrap(), vec![bs("1")]);
        let bad = Transcript::new(vec![bs("0"), bs("1")]);
        assert!(matches!(
            q1(&c, &bad, &mut rng, Policy::Exact),
            Err(Error::ImpossibleCondition(_))
        ));
        assert!(matches!(
            q2(&c, &bad, &mut rng, Policy::rejection()),
            Err(Error::ImpossibleCondition(_))
        ));
    }

    #[test]
    fn rejection_budget_exhaustion_is_distinct() {
        // outcome 1 has probability 1/4 on qubit 0
        let c = Circuit::new(
            1,
            vec![Step::new(
                vec![Gate::Matrix {
                    targets: vec![0],
                    matrix: crate::qsim::euler_unitary(0.0, std::f64::consts::FRAC_PI_3, 0.0),
                }],
                1,
            )],
        )
        .unwrap();
        let mut rng = SimRng::seed_from_u64(6);
        let tau = Transcript::new(vec![bs("1")]);
        let mut hit = false;
        for _ in 0..20 {
            if let Err(e) = q2(&c, &tau, &mut rng, Policy::Rejection { budget: 1 }) {
                assert_eq!(e, Error::RetryBudgetExhausted { budget: 1 });
                hit = true;
            }
        }
        assert!(hit);
    }

    #[test]
    fn rejection_agrees_with_exact() {
        let mut rng = SimRng::seed_from_u64(7);
        let c = loop {
            let c = random_circuit(3, 2, &mut rng).unwrap();
            if c.measured(1) >= 1 && c.measured(1) < 3 {
                break c;
            }
        };
        let tree = enumerate_branches(&c).unwrap();
        let tau = tree.node(tree.level(1)[0]).transcript.clone();
        let exact = q2_law(&c, &tau).unwrap();
        let draws: Vec<_> = (0..10_000)
            .map(|_| {
                BitString::concat_all(&q2(&c, &tau, &mut rng, Policy::rejection()).unwrap())
                    .unwrap()
            })
            .collect();
        let (_, emp) = empirical(&draws).unwrap();
        assert!(emp.sd(&exact).unwrap() <= 0.02);
        let exact1 = q1_law(&c, &tau).unwrap();
        let draws: Vec<_> = (0..10_000)
            .map(|_| {
                BitString::concat_all(&q1(&c, &tau, &mut rng, Policy::rejection()).unwrap())
                    .unwrap()
            })
            .collect();
        let (_, emp) = empirical(&draws).unwrap();
        assert!(emp.sd(&exact1).unwrap() <= 0.02);
    }

    #[test]
    fn q1_q2_rebuild_fiber() {
        let mut rng = SimRng::seed_from_u64(8);
        let c = random_circuit(2, 3, &mut rng).unwrap();
        let tree = enumerate_branches(&c).unwrap();
        let joint = oracle_exact(&c).unwrap();
        let t = 1;
        let l = c.qubits();
        let m = c.measures();
        for &id in tree.level(t) {
            let node = tree.node(id);
            let tau = node.transcript.clone();
            let fiber = joint
                .condition_by(|v| (0..t).all(|i| v.slice(i * l, i * l + m[i]) == tau.outcomes()[i]))
                .unwrap()
                .push_forward(|v| {
                    let mut us = BitString::EMPTY;
                    let mut ws = BitString::EMPTY;
                    for i in 0..c.len() {
                        let r = v.slice(i * l, (i + 1) * l);
                        if i >= t {
                            us = us.concat(&r.prefix(m[i])).unwrap();
                        } else {
                            ws = ws.concat(&r.suffix(m[i])).unwrap();
                        }
                    }
                    us.concat(&ws).unwrap()
                })
                .unwrap();
            let rebuilt = q1_law(&c, &tau).unwrap().product(&q2_law(&c, &tau).unwrap()).unwrap();
            assert!(fiber.sd(&rebuilt).unwrap() < 1e-9);
        }
    }
}
