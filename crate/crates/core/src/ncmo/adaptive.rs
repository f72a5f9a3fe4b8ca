use std::sync::Arc;

use rand::Rng;

use super::oracle::{oracle_exact, oracle_sample, OracleOutput};
use crate::bits::BitString;
use crate::dist::{DistBuilder, FiniteDist};
use crate::error::{Error, Result};
use crate::qsim::Circuit;
use crate::SimRng;

/// What a base machine does next.
#[derive(Clone, Debug, PartialEq)]
pub enum MachineStep {
    Query(Circuit),
    Output(BitString),
}

/// Deterministic classical driver of an adaptive oracle session.
pub trait BaseMachine: Send + Sync {
    fn step(&self, x: &BitString, eps: f64, history: &[OracleOutput]) -> Result<MachineStep>;

    /// Declared bound `N` on the number of queries.
    fn query_bound(&self) -> usize;

    /// Declared output length, when fixed.
    fn output_len(&self) -> Option<usize> {
        None
    }
}

type StepFn = dyn Fn(&BitString, f64, &[OracleOutput]) -> Result<MachineStep> + Send + Sync;

/// Machine given by a closure.
#[derive(Clone)]
pub struct FnMachine {
    bound: usize,
    output_len: Option<usize>,
    f: Arc<StepFn>,
}

impl FnMachine {
    pub fn new(
        bound: usize,
        output_len: Option<usize>,
        f: impl Fn(&BitString, f64, &[OracleOutput]) -> Result<MachineStep> + Send + Sync + 'static,
    ) -> Self {
        FnMachine {
            bound,
            output_len,
            f: Arc::new(f),
        }
    }

    /// Single query `circuit(x, ε)` whose output is `decode(reads)`.
    pub fn non_adaptive(
        output_len: Option<usize>,
        circuit: impl Fn(&BitString, f64) -> Result<Circuit> + Send + Sync + 'static,
        decode: impl Fn(&OracleOutput) -> BitString + Send + Sync + 'static,
    ) -> Self {
        FnMachine::new(1, output_len, move |x, eps, hist| match hist {
            [] => Ok(MachineStep::Query(circuit(x, eps)?)),
            [o] => Ok(MachineStep::Output(decode(o))),
            _ => Err(Error::Protocol("non-adaptive machine saw two answers".into())),
        })
    }
}

impl BaseMachine for FnMachine {
    fn step(&self, x: &BitString, eps: f64, history: &[OracleOutput]) -> Result<MachineStep> {
        (self.f)(x, eps, history)
    }

    fn query_bound(&self) -> usize {
        self.bound
    }

    fn output_len(&self) -> Option<usize> {
        self.output_len
    }
}

/// Something that answers oracle queries, with an exact law for each.
pub trait OracleBackend: Send + Sync {
    fn name(&self) -> String;

    fn query(&self, c: &Circuit, accuracy: f64, rng: &mut SimRng) -> Result<OracleOutput>;

    /// Law of the concatenated reads for one query.
    fn law(&self, c: &Circuit, accuracy: f64) -> Result<FiniteDist>;
}

/// The genuine oracle; accuracy is ignored.
#[derive(Clone, Copy, Debug, Default)]
pub struct TrueOracle;

impl OracleBackend for TrueOracle {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn query(&self, c: &Circuit, _accuracy: f64, rng: &mut SimRng) -> Result<OracleOutput> {
        oracle_sample(c, rng)
    }

    fn law(&self, c: &Circuit, _accuracy: f64) -> Result<FiniteDist> {
        oracle_exact(c)
    }
}

/// Picks the backend and accuracy used for query number `i` (from 0).
pub type Route<'a> = dyn Fn(usize) -> (&'a dyn OracleBackend, f64) + 'a;

fn next_step(
    machine: &dyn BaseMachine,
    x: &BitString,
    eps: f64,
    history: &[OracleOutput],
) -> Result<MachineStep> {
    let step = machine.step(x, eps, history)?;
    if matches!(step, MachineStep::Query(_)) && history.len() >= machine.query_bound() {
        return Err(Error::Protocol(format!(
            "machine exceeded its bound of {} queries",
            machine.query_bound()
        )));
    }
    Ok(step)
}

/// Runs the machine with a fresh backend call per query.
pub fn adaptive_session(
    machine: &dyn BaseMachine,
    x: &BitString,
    eps: f64,
    backend: &dyn OracleBackend,
    rng: &mut SimRng,
) -> Result<BitString> {
    adaptive_session_routed(machine, x, eps, &|_| (backend, eps), rng)
}

pub fn adaptive_session_routed(
    machine: &dyn BaseMachine,
    x: &BitString,
    eps: f64,
    route: &Route<'_>,
    rng: &mut SimRng,
) -> Result<BitString> {
    let mut history = Vec::new();
    loop {
        match next_step(machine, x, eps, &history)? {
            MachineStep::Output(y) => return Ok(y),
            MachineStep::Query(c) => {
                let (backend, acc) = route(history.len());
                history.push(backend.query(&c, acc, rng)?);
            }
        }
    }
}

/// Exact law of the session output by enumerating every answer sequence.
pub fn session_law(
    machine: &dyn BaseMachine,
    x: &BitString,
    eps: f64,
    backend: &dyn OracleBackend,
) -> Result<FiniteDist> {
    session_law_routed(machine, x, eps, &|_| (backend, eps))
}

pub fn session_law_routed(
    machine: &dyn BaseMachine,
    x: &BitString,
    eps: f64,
    route: &Route<'_>,
) -> Result<FiniteDist> {
    let mut outputs: Vec<(BitString, f64)> = Vec::new();
    fn walk(
        machine: &dyn BaseMachine,
        x: &BitString,
        eps: f64,
        route: &Route<'_>,
        history: &mut Vec<OracleOutput>,
        weight: f64,
        outputs: &mut Vec<(BitString, f64)>,
    ) -> Result<()> {
        match next_step(machine, x, eps, history)? {
            MachineStep::Output(y) => outputs.push((y, weight)),
            MachineStep::Query(c) => {
                let (backend, acc) = route(history.len());
                for (v, p) in backend.law(&c, acc)?.iter() {
                    history.push(OracleOutput::from_concat(v, &c)?);
                    walk(machine, x, eps, route, history, weight * p, outputs)?;
                    history.pop();
                }
            }
        }
        Ok(())
    }
    walk(machine, x, eps, route, &mut Vec::new(), 1.0, &mut outputs)?;
    let len = outputs.first().map(|(y, _)| y.len()).unwrap_or(0);
    let mut b = DistBuilder::new(len);
    for (y, p) in outputs {
        b.add(y, p).map_err(|_| Error::Protocol("machine output length varies".into()))?;
    }
    b.finish()
}

type InstanceFn = dyn Fn(usize) -> Result<FiniteDist> + Send + Sync;
type ReferenceFn = dyn Fn(&BitString, f64) -> Result<FiniteDist> + Send + Sync;

/// A base machine together with an instance distribution per security
/// parameter and, optionally, the target distributions it should sample.
#[derive(Clone)]
pub struct PdqpInstanceFamily {
    pub machine: Arc<dyn BaseMachine>,
    pub reference: Option<Arc<ReferenceFn>>,
    pub instances: Arc<InstanceFn>,
    /// Accuracy used when the family is turned into a puzzle.
    pub eps: f64,
    decision: bool,
}

impl PdqpInstanceFamily {
    pub fn new(
        machine: Arc<dyn BaseMachine>,
        instances: impl Fn(usize) -> Result<FiniteDist> + Send + Sync + 'static,
    ) -> Self {
        PdqpInstanceFamily {
            machine,
            reference: None,
            instances: Arc::new(instances),
            eps: 0.1,
            decision: false,
        }
    }

    pub fn with_reference(
        mut self,
        r: impl Fn(&BitString, f64) -> Result<FiniteDist> + Send + Sync + 'static,
    ) -> Self {
        self.reference = Some(Arc::new(r));
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn is_decision(&self) -> bool {
        self.decision
    }

    pub fn instance_law(&self, lambda: usize) -> Result<FiniteDist> {
        (self.instances)(lambda)
    }

    pub fn sample_instance<R: Rng + ?Sized>(&self, lambda: usize, rng: &mut R) -> Result<BitString> {
        Ok(self.instance_law(lambda)?.sample(rng))
    }

    /// The single circuit `C_x` queried by a non-adaptive machine.
    pub fn circuit(&self, x: &BitString) -> Result<Circuit> {
        self.circuit_at(x, self.eps)
    }

    /// `C_{x,ε}`.
    pub fn circuit_at(&self, x: &BitString, eps: f64) -> Result<Circuit> {
        match self.machine.step(x, eps, &[])? {
            MachineStep::Query(c) => Ok(c),
            MachineStep::Output(_) => Err(Error::structural(format!(
                "machine makes no query on instance {x}"
            ))),
        }
    }

    /// Exact output law against the genuine oracle.
    pub fn output_law(&self, x: &BitString, eps: f64) -> Result<FiniteDist> {
        self.output_law_with(x, eps, &TrueOracle)
    }

    pub fn output_law_with(
        &self,
        x: &BitString,
        eps: f64,
        backend: &dyn OracleBackend,
    ) -> Result<FiniteDist> {
        let law = session_law(self.machine.as_ref(), x, eps, backend)?;
        if self.decision && law.bit_len() != 1 {
            return Err(Error::structural(format!(
                "decision machine produced {}-bit output",
                law.bit_len()
            )));
        }
        Ok(law)
    }

    /// `sd(output law, D_x)` when a reference is attached.
    pub fn reference_gap(&self, x: &BitString, eps: f64) -> Result<Option<f64>> {
        match &self.reference {
            None => Ok(None),
            Some(r) => Ok(Some(self.output_law(x, eps)?.sd(&r(x, eps)?)?)),
        }
    }
}

/// Views a one-bit decision machine as a sampling problem.
pub fn decision_as_sampling(
    machine: Arc<dyn BaseMachine>,
    instances: impl Fn(usize) -> Result<FiniteDist> + Send + Sync + 'static,
) -> Result<PdqpInstanceFamily> {
    match machine.output_len() {
        Some(1) | None => {}
        Some(n) => {
            return Err(Error::structural(format!(
                "decision machine declares {n}-bit output"
            )))
        }
    }
    let mut fam = PdqpInstanceFamily::new(machine, instances);
    fam.decision = true;
    Ok(fam)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{bell_circuit, Gate, Step};
    use rand::SeedableRng;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn constant(bit: &'static str) -> FnMachine {
        FnMachine::new(0, Some(1), move |_, _, _| Ok(MachineStep::Output(bs(bit))))
    }

    /// Query 1 reads `|+⟩`; query 2 prepares `|1⟩` if `v_1 = 1` and `|+⟩`
    /// otherwise. Outputs both reads.
    fn two_query() -> FnMachine {
        FnMachine::new(2, Some(2), |_, _, hist| {
            let plus = Circuit::new(1, vec![Step::new(vec![Gate::H(0)], 0)]).unwrap();
            Ok(match hist {
                [] => MachineStep::Query(plus),
                [a] => {
                    let mut gates = Vec::new();
                    if a.reads[0] == bs("1") {
                        gates.push(Gate::X(0));
                    } else {
                        gates.push(Gate::H(0));
                    }
                    MachineStep::Query(Circuit::new(1, vec![Step::new(gates, 0)]).unwrap())
                }
                [a, b] => MachineStep::Output(a.reads[0].concat(&b.reads[0]).unwrap()),
                _ => unreachable!(),
            })
        })
    }

    #[test]
    fn zero_query_machine() {
        let m = constant("1");
        let mut rng = SimRng::seed_from_u64(1);
        assert_eq!(
            adaptive_session(&m, &bs("0"), 0.1, &TrueOracle, &mut rng).unwrap(),
            bs("1")
        );
    }

    #[test]
    fn nested_law() {
        let m = two_query();
        let law = session_law(&m, &bs(""), 0.1, &TrueOracle).unwrap();
        assert!((law.prob(&bs("00")) - 0.25).abs() < 1e-12);
        assert!((law.prob(&bs("01")) - 0.25).abs() < 1e-12);
        assert!((law.prob(&bs("11")) - 0.5).abs() < 1e-12);
        let mut rng = SimRng::seed_from_u64(2);
        let draws: Vec<_> = (0..20_000)
            .map(|_| adaptive_session(&m, &bs(""), 0.1, &TrueOracle, &mut rng).unwrap())
            .collect();
        let (_, emp) = crate::dist::empirical(&draws).unwrap();
        assert!(emp.sd(&law).unwrap() < 0.02);
    }

    #[test]
    fn query_bound_enforced() {
        let greedy = FnMachine::new(1, None, |_, _, _| Ok(MachineStep::Query(bell_circuit(0, None))));
        let mut rng = SimRng::seed_from_u64(3);
        assert!(matches!(
            adaptive_session(&greedy, &bs("0"), 0.1, &TrueOracle, &mut rng),
            Err(Error::Protocol(_))
        ));
        assert!(matches!(
            session_law(&greedy, &bs("0"), 0.1, &TrueOracle),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn identical_queries_are_independent() {
        let m = FnMachine::new(2, Some(4), |_, _, hist| {
            Ok(match hist {
                [a, b] => MachineStep::Output(a.concat().concat(&b.concat()).unwrap()),
                _ => MachineStep::Query(bell_circuit(0, None)),
            })
        });
        let law = session_law(&m, &bs(""), 0.1, &TrueOracle).unwrap();
        let single = oracle_exact(&bell_circuit(0, None)).unwrap();
        assert!(law.sd(&single.product(&single).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn decision_wrapping() {
        let fam = decision_as_sampling(Arc::new(constant("1")), |_| Ok(FiniteDist::uniform(2))).unwrap();
        for x in BitString::all(2) {
            assert_eq!(fam.output_law(&x, 0.1).unwrap(), FiniteDist::point(bs("1")));
        }
        let parity = FnMachine::non_adaptive(
            Some(1),
            |_, _| Circuit::new(2, vec![Step::new(vec![Gate::H(0), Gate::H(1)], 0)]),
            |o| BitString::from_index(o.reads[0].count_ones() as usize % 2, 1),
        );
        let fam = decision_as_sampling(Arc::new(parity.clone()), |_| Ok(FiniteDist::uniform(1))).unwrap();
        let law = fam.output_law(&bs("0"), 0.1).unwrap();
        assert!(law.sd(&FiniteDist::uniform(1)).unwrap() < 1e-12);
        assert_eq!(law, session_law(&parity, &bs("0"), 0.1, &TrueOracle).unwrap());
        let wide = FnMachine::new(0, Some(2), |_, _, _| Ok(MachineStep::Output(bs("01"))));
        assert!(matches!(
            decision_as_sampling(Arc::new(wide), |_| Ok(FiniteDist::uniform(1))),
            Err(Error::Structural(_))
        ));
        let undeclared = FnMachine::new(0, None, |_, _, _| Ok(MachineStep::Output(bs("01"))));
        let fam = decision_as_sampling(Arc::new(undeclared), |_| Ok(FiniteDist::uniform(1))).unwrap();
        assert!(matches!(fam.output_law(&bs("0"), 0.1), Err(Error::Structural(_))));
    }
}
