use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::circuit::{Circuit, Transcript};
use super::state::{StateVector, PRUNE_TOL};
use crate::bits::BitString;
use crate::dist::{DistBuilder, FiniteDist};
use crate::error::{Error, Result};

/// Default bound on `Π_t 2^{m_t}`.
pub const DEFAULT_MAX_BRANCHES: usize = 1 << 16;
/// Bound on stored amplitudes across all nodes.
pub const MAX_STORED_AMPLITUDES: usize = 1 << 24;

static MAX_BRANCHES: AtomicUsize = AtomicUsize::new(DEFAULT_MAX_BRANCHES);

pub fn max_branches() -> usize {
    MAX_BRANCHES.load(Ordering::Relaxed)
}

pub fn set_max_branches(n: usize) {
    MAX_BRANCHES.store(n, Ordering::Relaxed);
}

#[derive(Clone, Debug)]
pub struct BranchNode {
    pub depth: usize,
    pub transcript: Transcript,
    /// `Pr[τ_t]`.
    pub prob: f64,
    /// `ψ_t^{τ_t}`, or `|0…0⟩` at the root.
    pub state: StateVector,
    /// Readout law of `state`.
    pub readout: FiniteDist,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// Every collapsing path of a circuit with its exact probability and
/// post-measurement states.
#[derive(Clone, Debug)]
pub struct BranchTree {
    qubits: usize,
    measures: Vec<usize>,
    nodes: Vec<BranchNode>,
    levels: Vec<Vec<usize>>,
    index: HashMap<Transcript, usize>,
}

pub fn enumerate_branches(c: &Circuit) -> Result<BranchTree> {
    enumerate_branches_with(c, max_branches())
}

pub fn enumerate_branches_with(c: &Circuit, max: usize) -> Result<BranchTree> {
    let total_bits: usize = c.measures().iter().sum();
    if total_bits >= usize::BITS as usize || (1usize << total_bits) > max {
        return Err(Error::too_large("collapsing branch count", max));
    }
    let dim = 1usize << c.qubits();
    let root_state = StateVector::zero(c.qubits())?;
    let root = BranchNode {
        depth: 0,
        transcript: Transcript::empty(),
        prob: 1.0,
        readout: root_state.readout_distribution(),
        state: root_state,
        parent: None,
        children: Vec::new(),
    };
    let mut tree = BranchTree {
        qubits: c.qubits(),
        measures: c.measures(),
        nodes: vec![root],
        levels: vec![vec![0]],
        index: HashMap::new(),
    };
    tree.index.insert(Transcript::empty(), 0);
    for (t, step) in c.steps().iter().enumerate() {
        let mut level = Vec::new();
        for &pi in &tree.levels[t] {
            let mut evolved = tree.nodes[pi].state.clone();
            evolved.apply_gates_unchecked(&step.gates);
            let probs = evolved.outcome_probs(step.measure);
            for (u, &p) in probs.iter().enumerate() {
                if p <= PRUNE_TOL {
                    continue;
                }
                let u = BitString::from_index(u, step.measure);
                let (post, p) = if step.measure == 0 {
                    (evolved.clone(), 1.0)
                } else {
                    evolved.project(&u)?
                };
                if (tree.nodes.len() + 1) * dim > MAX_STORED_AMPLITUDES {
                    return Err(Error::too_large(
                        "stored branch amplitudes",
                        MAX_STORED_AMPLITUDES,
                    ));
                }
                let mut transcript = tree.nodes[pi].transcript.clone();
                transcript.push(u);
                let node = BranchNode {
                    depth: t + 1,
                    transcript: transcript.clone(),
                    prob: tree.nodes[pi].prob * p,
                    readout: post.readout_distribution(),
                    state: post,
                    parent: Some(pi),
                    children: Vec::new(),
                };
                let id = tree.nodes.len();
                tree.nodes.push(node);
                tree.nodes[pi].children.push(id);
                tree.index.insert(transcript, id);
                level.push(id);
            }
        }
        tree.levels.push(level);
    }
    Ok(tree)
}

impl BranchTree {
    pub fn qubits(&self) -> usize {
        self.qubits
    }

    /// Number of steps `T`.
    pub fn steps(&self) -> usize {
        self.measures.len()
    }

    pub fn measures(&self) -> &[usize] {
        &self.measures
    }

    pub fn nodes(&self) -> &[BranchNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &BranchNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> &BranchNode {
        &self.nodes[0]
    }

    /// Node ids at depth `t`.
    pub fn level(&self, t: usize) -> &[usize] {
        &self.levels[t]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &BranchNode> + '_ {
        self.levels[self.steps()].iter().map(move |&i| &self.nodes[i])
    }

    pub fn find_id(&self, tau: &Transcript) -> Option<usize> {
        self.index.get(tau).copied()
    }

    pub fn find(&self, tau: &Transcript) -> Option<&BranchNode> {
        self.find_id(tau).map(|i| &self.nodes[i])
    }

    /// Node for `tau`, or an impossible-condition error if it has no mass.
    pub fn require(&self, tau: &Transcript) -> Result<&BranchNode> {
        if tau.len() > self.steps()
            || tau
                .outcomes()
                .iter()
                .zip(&self.measures)
                .any(|(u, &m)| u.len() != m)
        {
            return Err(Error::structural(format!(
                "transcript {tau} does not match the circuit's measurements"
            )));
        }
        self.find(tau).ok_or_else(|| {
            Error::ImpossibleCondition(format!("transcript {tau} has probability zero"))
        })
    }

    /// Ids of the nodes on the path to `id`, depth 1 first.
    pub fn path(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            out.push(cur);
            cur = p;
        }
        out.reverse();
        out
    }

    pub fn total_leaf_prob(&self) -> f64 {
        self.leaves().map(|n| n.prob).sum()
    }

    /// Law of `τ_t` as concatenated bits.
    pub fn transcript_law(&self, t: usize) -> Result<FiniteDist> {
        let len: usize = self.measures[..t].iter().sum();
        let mut b = DistBuilder::new(len);
        for &i in &self.levels[t] {
            let n = &self.nodes[i];
            b.add(n.transcript.concat()?, n.prob)?;
        }
        b.finish_normalized()
    }

    /// Largest deviation between a node's probability and its children's sum.
    pub fn max_child_sum_error(&self) -> f64 {
        self.levels[..self.steps()]
            .iter()
            .flatten()
            .map(|&i| {
                let n = &self.nodes[i];
                let s: f64 = n.children.iter().map(|&c| self.nodes[c].prob).sum();
                (s - n.prob).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::circuit::{bell_circuit, random_circuit, run_prefix, Step};
    use crate::dist::empirical;
    use crate::SimRng;
    use rand::SeedableRng;

    #[test]
    fn unmeasured_circuit_has_one_branch() {
        let t = enumerate_branches(&bell_circuit(0, Some(0))).unwrap();
        assert_eq!(t.leaves().count(), 1);
        assert_eq!(t.leaves().next().unwrap().prob, 1.0);
    }

    #[test]
    fn bell_branches() {
        let t = enumerate_branches(&bell_circuit(1, None)).unwrap();
        let leaves: Vec<_> = t.leaves().collect();
        assert_eq!(leaves.len(), 2);
        for n in leaves {
            assert!((n.prob - 0.5).abs() < 1e-12);
            let u = n.transcript.outcomes()[0];
            let uu = u.concat(&u).unwrap();
            assert!((n.readout.prob(&uu) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn guard_names_bound() {
        let c = Circuit::new(3, vec![Step::measure_only(3); 3]).unwrap();
        let err = enumerate_branches_with(&c, 256).unwrap_err();
        assert_eq!(
            err,
            Error::InstanceTooLarge {
                what: "collapsing branch count".into(),
                bound: 256
            }
        );
        assert!(enumerate_branches_with(&c, 512).is_ok());
    }

    #[test]
    fn zero_mass_transcript_is_impossible() {
        let c = bell_circuit(2, None);
        let t = enumerate_branches(&c).unwrap();
        let tau = Transcript::new(vec!["01".parse().unwrap()]);
        assert!(matches!(t.require(&tau), Err(Error::ImpossibleCondition(_))));
        let bad = Transcript::new(vec!["0".parse().unwrap()]);
        assert!(matches!(t.require(&bad), Err(Error::Structural(_))));
    }

    #[test]
    fn run_prefix_matches_tree() {
        let mut rng = SimRng::seed_from_u64(11);
        let c = random_circuit(3, 2, &mut rng).unwrap();
        let tree = enumerate_branches(&c).unwrap();
        let law = tree.transcript_law(2).unwrap();
        let draws: Vec<_> = (0..100_000)
            .map(|_| run_prefix(&c, 2, &mut rng).unwrap().0.concat().unwrap())
            .collect();
        let (_, emp) = empirical(&draws).unwrap();
        assert!(emp.sd(&law).unwrap() <= 0.01);
    }

    #[test]
    fn post_states_agree_with_outcomes() {
        let mut rng = SimRng::seed_from_u64(12);
        for _ in 0..10 {
            let c = random_circuit(3, 3, &mut rng).unwrap();
            let tree = enumerate_branches(&c).unwrap();
            assert!((tree.total_leaf_prob() - 1.0).abs() < 1e-9);
            assert!(tree.max_child_sum_error() < 1e-9);
            for n in &tree.nodes()[1..] {
                let u = n.transcript.outcomes()[n.depth - 1];
                for (v, p) in n.readout.iter() {
                    assert!(p == 0.0 || v.starts_with(&u));
                }
            }
        }
    }
}
