use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::dist::FiniteDist;
use crate::error::{Error, Result};
use crate::ncmo::{
    adaptive_session_routed, session_law_routed, BaseMachine, MachineStep, OracleBackend,
    OracleOutput, TrueOracle,
};
use crate::SimRng;

fn check_index(machine: &dyn BaseMachine, i: usize) -> Result<()> {
    if i > machine.query_bound() {
        return Err(Error::structural(format!(
            "replacement index {i} outside 0..={}",
            machine.query_bound()
        )));
    }
    Ok(())
}

/// Runs the machine with its first `i` queries answered by `solver` at
/// accuracy `ε/N` and the rest by the genuine oracle.
pub fn adaptive_replacement_hybrid(
    machine: &dyn BaseMachine,
    x: &BitString,
    eps: f64,
    i: usize,
    solver: &dyn OracleBackend,
    rng: &mut SimRng,
) -> Result<BitString> {
    check_index(machine, i)?;
    let n = machine.query_bound().max(1) as f64;
    let route = |q: usize| -> (&dyn OracleBackend, f64) {
        if q < i {
            (solver, eps / n)
        } else {
            (&TrueOracle, eps)
        }
    };
    adaptive_session_routed(machine, x, eps, &route, rng)
}

pub fn replacement_law(
    machine: &dyn BaseMachine,
    x: &BitString,
    eps: f64,
    i: usize,
    solver: &dyn OracleBackend,
) -> Result<FiniteDist> {
    check_index(machine, i)?;
    let n = machine.query_bound().max(1) as f64;
    let route = |q: usize| -> (&dyn OracleBackend, f64) {
        if q < i {
            (solver, eps / n)
        } else {
            (&TrueOracle, eps)
        }
    };
    session_law_routed(machine, x, eps, &route)
}

/// Distances along the replacement chain `B_0, …, B_N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplacementReport {
    /// `SD(B_i, B_{i+1})`.
    pub swap_sd: Vec<f64>,
    /// `E[SD(solver(C), Q(C))]` over the `(i+1)`-th query `C` of `B_{i+1}`.
    pub swap_bound: Vec<f64>,
    /// Worst per-circuit solver distance seen at each position.
    pub worst_solver_sd: Vec<f64>,
    /// `SD(B_0, B_N)`.
    pub end_to_end: f64,
}

impl ReplacementReport {
    pub fn bounds_hold(&self, tol: f64) -> bool {
        self.swap_sd
            .iter()
            .zip(&self.swap_bound)
            .all(|(d, b)| *d <= b + tol)
    }
}

/// Expected and worst solver error at query position `pos`, with earlier
/// queries answered by the solver.
fn position_error(
    machine: &dyn BaseMachine,
    x: &BitString,
    eps: f64,
    pos: usize,
    solver: &dyn OracleBackend,
) -> Result<(f64, f64)> {
    let n = machine.query_bound().max(1) as f64;
    let mut expected = 0.0;
    let mut worst: f64 = 0.0;
    #[allow(clippy::too_many_arguments)]
    fn walk(
        machine: &dyn BaseMachine,
        x: &BitString,
        eps: f64,
        acc: f64,
        pos: usize,
        solver: &dyn OracleBackend,
        history: &mut Vec<OracleOutput>,
        weight: f64,
        expected: &mut f64,
        worst: &mut f64,
    ) -> Result<()> {
        let MachineStep::Query(c) = machine.step(x, eps, history)? else {
            return Ok(());
        };
        if history.len() == pos {
            let d = solver.law(&c, acc)?.sd(&TrueOracle.law(&c, eps)?)?;
            *expected += weight * d;
            *worst = worst.max(d);
            return Ok(());
        }
        for (v, p) in solver.law(&c, acc)?.iter() {
            history.push(OracleOutput::from_concat(v, &c)?);
            walk(machine, x, eps, acc, pos, solver, history, weight * p, expected, worst)?;
            history.pop();
        }
        Ok(())
    }
    walk(
        machine,
        x,
        eps,
        eps / n,
        pos,
        solver,
        &mut Vec::new(),
        1.0,
        &mut expected,
        &mut worst,
    )?;
    Ok((expected, worst))
}

pub fn replacement_report(
    machine: &dyn BaseMachine,
    x: &BitString,
    eps: f64,
    solver: &dyn OracleBackend,
) -> Result<ReplacementReport> {
    let n = machine.query_bound();
    let laws = (0..=n)
        .map(|i| replacement_law(machine, x, eps, i, solver))
        .collect::<Result<Vec<_>>>()?;
    let swap_sd = laws
        .windows(2)
        .map(|w| w[0].sd(&w[1]))
        .collect::<Result<Vec<_>>>()?;
    let mut swap_bound = Vec::new();
    let mut worst_solver_sd = Vec::new();
    for pos in 0..n {
        let (e, w) = position_error(machine, x, eps, pos, solver)?;
        swap_bound.push(e);
        worst_solver_sd.push(w);
    }
    Ok(ReplacementReport {
        end_to_end: laws[0].sd(&laws[n])?,
        swap_sd,
        swap_bound,
        worst_solver_sd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ncmo::{session_law, FnMachine};
    use crate::puzzles::adversary::{Oblivious, Perfect};
    use crate::puzzles::hybrid::QStarBackend;
    use crate::qsim::{random_circuit, Circuit};
    use rand::SeedableRng;
    use std::sync::Arc;

    /// Two queries on 2 qubits; the second circuit is picked by the first read.
    pub(crate) fn two_query_machine(seed: u64) -> FnMachine {
        let mut rng = SimRng::seed_from_u64(seed);
        let first = random_circuit(2, 2, &mut rng).unwrap();
        let seconds: Vec<Circuit> = (0..4).map(|_| random_circuit(2, 1, &mut rng).unwrap()).collect();
        FnMachine::new(2, None, move |_, _, hist| {
            Ok(match hist {
                [] => MachineStep::Query(first.clone()),
                [a] => MachineStep::Query(seconds[a.reads[1].index()].clone()),
                [a, b] => MachineStep::Output(a.reads[0].concat(&b.concat()).unwrap()),
                _ => return Err(Error::Protocol("too many answers".into())),
            })
        })
    }

    #[test]
    fn endpoints() {
        let m = two_query_machine(1);
        let x = BitString::EMPTY;
        let truth = session_law(&m, &x, 0.1, &TrueOracle).unwrap();
        let solver = QStarBackend {
            x,
            adv: Arc::new(Perfect),
        };
        assert!(replacement_law(&m, &x, 0.1, 0, &solver).unwrap().sd(&truth).unwrap() < 1e-12);
        for i in 0..=2 {
            let law = replacement_law(&m, &x, 0.1, i, &solver).unwrap();
            assert!(law.sd(&truth).unwrap() < 1e-9);
        }
        assert!(replacement_law(&m, &x, 0.1, 3, &solver).is_err());
    }

    #[test]
    fn swaps_respect_solver_error() {
        let m = two_query_machine(2);
        let solver = QStarBackend {
            x: BitString::EMPTY,
            adv: Arc::new(Oblivious),
        };
        let r = replacement_report(&m, &BitString::EMPTY, 0.1, &solver).unwrap();
        assert!(r.bounds_hold(1e-9), "{r:?}");
        for (e, w) in r.swap_bound.iter().zip(&r.worst_solver_sd) {
            assert!(e <= w);
        }
        assert!(r.end_to_end <= r.swap_sd.iter().sum::<f64>() + 1e-9);
    }

    #[test]
    fn sampled_hybrid_runs() {
        let m = two_query_machine(3);
        let solver = QStarBackend {
            x: BitString::EMPTY,
            adv: Arc::new(Perfect),
        };
        let mut rng = SimRng::seed_from_u64(4);
        let y = adaptive_replacement_hybrid(&m, &BitString::EMPTY, 0.1, 1, &solver, &mut rng).unwrap();
        assert_eq!(y.len(), 4);
    }
}
