//! End-to-end checks over seeded desk-scale corpora. Each criterion returns
//! named values with the tolerance they are held to.

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::dcrpuzz::{
    col_exact, preimage_pair_scheme, random_circuit_scheme, samplers, ColAdversary,
    CollisionAdversary, OraclePipeline,
};
use crate::dist::{empirical, FiniteDist};
use crate::error::{Error, Result};
use crate::ncmo::{oracle_exact, oracle_exact_from, oracle_sample, session_law, FnMachine, MachineStep, TrueOracle};
use crate::primitives::{
    com_break_exact, com_break_via_collision, com_to_dcrpuzz, mac_break_exact,
    mac_break_via_collision, mac_to_dcrpuzz, pair_parity_success, ComVariant, OneShotMac,
    ToyCommitment,
};
use crate::puzzles::{
    hybrid_report, make_adversary, replacement_law, AdvContext, AdversaryKind, QStarBackend,
};
use crate::qsim::{bell_circuit, enumerate_branches, random_circuit, Circuit};
use crate::SimRng;

pub const DEFAULT_SEED: u64 = 7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value ≤ tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Check {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            tolerance: 1.0,
            pass: ok,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub name: String,
    pub checks: Vec<Check>,
    /// Reported quantities that are not held to a tolerance.
    pub info: Vec<(String, f64)>,
}

impl CriterionReport {
    fn new(id: u8, name: &str) -> Self {
        CriterionReport {
            id,
            name: name.into(),
            checks: Vec::new(),
            info: Vec::new(),
        }
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// `worst` of several checks sharing a tolerance.
    fn worst(&mut self, name: &str, values: impl IntoIterator<Item = f64>, tol: f64) {
        let v = values.into_iter().fold(0.0, f64::max);
        self.checks.push(Check::at_most(name, v, tol));
    }

    fn info(&mut self, name: &str, v: f64) {
        self.info.push((name.into(), v));
    }

    /// One-line summary.
    pub fn summary(&self) -> String {
        let worst = self
            .checks
            .iter()
            .map(|c| format!("{} {:.3e}/{:.0e}", c.name, c.value, c.tolerance))
            .collect::<Vec<_>>()
            .join(", ");
        format!(
            "[{}] {:>2} {}: {}",
            if self.pass() { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            worst
        )
    }
}

fn rng_for(seed: u64, stream: u64) -> SimRng {
    let mut r = SimRng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Widths `(ℓ, T)` drawn for the sampling corpus.
pub const ORACLE_CORE_SHAPES: [(usize, usize); 7] =
    [(1, 1), (1, 2), (1, 3), (2, 1), (2, 2), (3, 1), (4, 1)];

pub fn oracle_core_corpus(seed: u64, count: usize) -> Result<Vec<Circuit>> {
    let mut rng = rng_for(seed, 1);
    (0..count)
        .map(|_| {
            let (l, t) = ORACLE_CORE_SHAPES[rng.gen_range(0..ORACLE_CORE_SHAPES.len())];
            random_circuit(l, t, &mut rng)
        })
        .collect()
}

/// Sampling against exact enumeration on small random circuits.
pub fn oracle_core(seed: u64, circuits: usize, shots: u64) -> Result<CriterionReport> {
    let corpus = oracle_core_corpus(seed, circuits)?;
    let rows = corpus
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let tree = enumerate_branches(c)?;
            let exact = oracle_exact_from(&tree)?;
            let mut rng = rng_for(seed, 1000 + i as u64);
            let draws = (0..shots)
                .map(|_| oracle_sample(c, &mut rng).map(|o| o.concat()))
                .collect::<Result<Vec<_>>>()?;
            let (_, emp) = empirical(&draws)?;
            let leaf_err = (tree.total_leaf_prob() - 1.0).abs();
            Ok((emp.sd(&exact)?, leaf_err.max(tree.max_child_sum_error())))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut r = CriterionReport::new(1, "oracle core");
    r.worst("max TV", rows.iter().map(|x| x.0), 0.01);
    r.worst("branch sum error", rows.iter().map(|x| x.1), 1e-9);
    r.info("circuits", circuits as f64);
    r.info("shots", shots as f64);
    Ok(r)
}

pub fn non_collapse_signature() -> Result<CriterionReport> {
    let mut r = CriterionReport::new(2, "non-collapse signature");
    let bits = |s: &str| s.parse::<BitString>().expect("literal");
    let none = oracle_exact(&bell_circuit(0, Some(0)))?;
    let want = FiniteDist::new(
        4,
        ["0000", "0011", "1100", "1111"].map(|s| (bits(s), 0.25)),
    )?;
    r.checks.push(Check::at_most("uniform joint", none.sd(&want)?, 1e-9));
    let c = bell_circuit(1, Some(0));
    let tree = enumerate_branches(&c)?;
    let mut worst: f64 = 0.0;
    for leaf in tree.leaves() {
        // each branch's read law at both steps must be the same point mass
        let path = tree.path(tree.find_id(&leaf.transcript).expect("leaf"));
        for &id in &path[1..] {
            let read = &tree.node(id).readout;
            let top = read.iter().map(|(_, p)| p).fold(0.0, f64::max);
            worst = worst.max(1.0 - top);
        }
    }
    let law = oracle_exact(&c)?;
    let off: f64 = law
        .iter()
        .filter(|(v, _)| v.prefix(2) != v.suffix(2))
        .map(|(_, p)| p)
        .sum();
    r.checks.push(Check::at_most("reads deterministic per branch", worst, 1e-9));
    r.checks.push(Check::at_most("Pr[v1 != v2]", off, 1e-9));
    Ok(r)
}

pub fn hybrid_kinds() -> Vec<AdversaryKind> {
    vec![
        AdversaryKind::Perfect,
        AdversaryKind::Rejection(3),
        AdversaryKind::Oblivious,
    ]
}

pub fn hybrid_corpus(seed: u64, count: usize) -> Result<Vec<AdvContext>> {
    let mut rng = rng_for(seed, 2);
    (0..count)
        .map(|i| {
            let l = rng.gen_range(1..=3);
            let t = rng.gen_range(1..=3);
            let c = random_circuit(l, t, &mut rng)?;
            AdvContext::new(BitString::from_index(i, 8), c)
        })
        .collect()
}

/// Hybrid endpoints, the per-step identity and telescoping.
pub fn hybrid_identities(seed: u64, circuits: usize) -> Result<Vec<CriterionReport>> {
    let corpus = hybrid_corpus(seed, circuits)?;
    let mut reports = Vec::new();
    for ctx in &corpus {
        for kind in hybrid_kinds() {
            reports.push((kind.clone(), hybrid_report(ctx, make_adversary(&kind)?.as_ref())?));
        }
    }
    let mut ends = CriterionReport::new(3, "hybrid endpoints");
    ends.worst("sd(B(T), Q)", reports.iter().map(|(_, h)| h.endpoint_oracle), 1e-9);
    ends.worst("sd(B(0), Q*)", reports.iter().map(|(_, h)| h.endpoint_q_star), 1e-9);
    let mut step = CriterionReport::new(4, "per-step identity");
    step.worst("max gap", reports.iter().map(|(_, h)| h.per_step.max_gap()), 1e-9);
    let mut tele = CriterionReport::new(5, "telescoping");
    tele.worst(
        "sd(Q*, Q) - sum",
        reports.iter().map(|(_, h)| -h.telescoping_slack),
        1e-9,
    );
    let perfect = reports
        .iter()
        .filter(|(k, _)| *k == AdversaryKind::Perfect)
        .map(|(_, h)| h.q_star_sd.max(h.per_step.total()));
    tele.worst("perfect adversary sides", perfect, 1e-9);
    let mean = |k: &AdversaryKind| {
        let v: Vec<f64> = reports
            .iter()
            .filter(|(kk, _)| kk == k)
            .map(|(_, h)| h.q_star_sd)
            .collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    for k in hybrid_kinds() {
        tele.info(&format!("mean sd(Q*, Q) {k}"), mean(&k));
    }
    Ok(vec![ends, step, tele])
}

pub fn dcr_corpus(seed: u64, count: usize) -> Result<Vec<crate::dcrpuzz::DcrScheme>> {
    let mut rng = rng_for(seed, 3);
    (0..count)
        .map(|_| {
            let p = rng.gen_range(1..=2);
            let a = rng.gen_range(1..=2);
            let j = rng.gen_range(0..=1);
            random_circuit_scheme(p, a, j, &mut rng)
        })
        .collect()
}

pub fn col_oracle_equivalence(seed: u64, schemes: usize) -> Result<CriterionReport> {
    let corpus = dcr_corpus(seed, schemes)?;
    let pp = BitString::EMPTY;
    let gaps = corpus
        .iter()
        .map(|s| OraclePipeline.law(s, &pp)?.sd(&col_exact(s, &pp)?))
        .collect::<Result<Vec<_>>>()?;
    let mut r = CriterionReport::new(6, "Col/oracle equivalence");
    r.worst("max sd", gaps, 1e-9);
    Ok(r)
}

pub fn mac_reduction(seed: u64, trials: u64) -> Result<CriterionReport> {
    let mac = OneShotMac::toy(4, 4, &mut rng_for(seed, 4))?;
    let scheme = mac_to_dcrpuzz(&mac)?;
    let exact = mac_break_exact(&mac, &scheme, &ColAdversary)?;
    let game = mac_break_via_collision(&mac, &scheme, &ColAdversary, trials, &mut rng_for(seed, 5))?;
    let mut r = CriterionReport::new(7, "MAC reduction");
    r.checks.push(Check::at_most("|exact - 15/16|", (exact - 0.9375).abs(), 1e-9));
    r.checks.push(Check::at_most(
        "|empirical - exact|",
        game.empirical_gap().unwrap_or(f64::INFINITY),
        0.02,
    ));
    r.info("exact win", exact);
    r.info("empirical win", game.rate());
    Ok(r)
}

pub fn commitment_reduction(seed: u64, trials: u64) -> Result<CriterionReport> {
    let com = ToyCommitment::toy(3, 1, &mut rng_for(seed, 6))?;
    let coherent = com_to_dcrpuzz(&com, ComVariant::Coherent)?;
    let literal = com_to_dcrpuzz(&com, ComVariant::Literal)?;
    let oracle_value = pair_parity_success(&com);
    let exact = com_break_exact(&com, &coherent, &ColAdversary)?;
    let game = com_break_via_collision(&com, &coherent, &ColAdversary, trials, &mut rng_for(seed, 7))?;
    let lit_exact = com_break_exact(&com, &literal, &ColAdversary)?;
    let lit_game = com_break_via_collision(&com, &literal, &ColAdversary, trials, &mut rng_for(seed, 8))?;
    let mut r = CriterionReport::new(8, "commitment reduction");
    r.checks.push(Check::at_most("|exact - enumerated|", (exact - oracle_value).abs(), 1e-9));
    r.checks.push(Check::at_most(
        "|empirical - exact|",
        game.empirical_gap().unwrap_or(f64::INFINITY),
        0.02,
    ));
    r.checks.push(Check::at_most("literal exact", lit_exact, 0.0));
    r.checks.push(Check::at_most("literal empirical", lit_game.rate(), 0.0));
    r.info("exact success", exact);
    r.info("empirical success", game.rate());
    r.info("half Pr[y has both parities]", 0.5 * com.both_parity_mass());
    Ok(r)
}

/// Two queries on 2 qubits; the second circuit is chosen by the first read.
pub fn two_query_machine(seed: u64) -> Result<FnMachine> {
    let mut rng = rng_for(seed, 9);
    let first = random_circuit(2, 2, &mut rng)?;
    let seconds = (0..4)
        .map(|_| random_circuit(2, 1, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(FnMachine::new(2, None, move |_, _, hist| {
        Ok(match hist {
            [] => MachineStep::Query(first.clone()),
            [a] => MachineStep::Query(seconds[a.reads[1].index()].clone()),
            [a, b] => MachineStep::Output(a.reads[0].concat(&b.concat())?),
            _ => return Err(Error::Protocol("more answers than queries".into())),
        })
    }))
}

pub fn adaptive_replacement(seed: u64, machines: u64) -> Result<CriterionReport> {
    let x = BitString::EMPTY;
    let eps = 0.1;
    let solver = QStarBackend {
        x,
        adv: make_adversary(&AdversaryKind::Perfect)?,
    };
    let mut gaps = Vec::new();
    for m in 0..machines {
        let machine = two_query_machine(seed.wrapping_add(m))?;
        let truth = session_law(&machine, &x, eps, &TrueOracle)?;
        for i in 0..=2 {
            gaps.push(replacement_law(&machine, &x, eps, i, &solver)?.sd(&truth)?);
        }
    }
    let mut r = CriterionReport::new(9, "adaptive replacement");
    r.worst("max sd", gaps, 1e-9);
    Ok(r)
}

/// `1 − E_y[1/|f⁻¹(y)|]` with `y = f(x)`, `x` uniform.
pub fn distinct_preimage_probability(table: &[usize]) -> f64 {
    let mut counts = std::collections::BTreeMap::new();
    for &y in table {
        *counts.entry(y).or_insert(0usize) += 1;
    }
    let n = table.len() as f64;
    1.0 - counts
        .values()
        .map(|&k| (k as f64 / n) / k as f64)
        .sum::<f64>()
}

pub fn preimage_pairs(seed: u64, functions: usize, shots: u64) -> Result<CriterionReport> {
    let mut rng = rng_for(seed, 10);
    let tables: Vec<Vec<usize>> = (0..functions)
        .map(|_| (0..8).map(|_| rng.gen_range(0..4)).collect())
        .collect();
    let pp = BitString::EMPTY;
    let rows = tables
        .par_iter()
        .enumerate()
        .map(|(i, table)| {
            let scheme = preimage_pair_scheme(table, 3, 2)?;
            let want = distinct_preimage_probability(table);
            let exact: f64 = OraclePipeline
                .law(&scheme, &pp)?
                .iter()
                .filter(|(t, _)| t.slice(2, 5) != t.suffix(5))
                .map(|(_, p)| p)
                .sum();
            let draw = samplers(&scheme, &OraclePipeline)?;
            let mut r = rng_for(seed, 2000 + i as u64);
            let mut hits = 0u64;
            for _ in 0..shots {
                let t = draw[&pp](&mut r)?;
                hits += u64::from(t.ans != t.ans2);
            }
            Ok(((exact - want).abs(), (hits as f64 / shots as f64 - want).abs()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut r = CriterionReport::new(10, "preimage pairs");
    r.worst("exact gap", rows.iter().map(|x| x.0), 1e-9);
    r.worst("empirical gap", rows.iter().map(|x| x.1), 0.01);
    Ok(r)
}

/// Named groups of criteria.
pub const SUITES: [&str; 6] = [
    "oracle-core",
    "hybrid-identities",
    "dcr",
    "reductions",
    "adaptive",
    "acceptance",
];

pub fn run_suite(name: &str, seed: u64) -> Result<Vec<CriterionReport>> {
    Ok(match name {
        "oracle-core" => vec![oracle_core(seed, 50, 100_000)?, non_collapse_signature()?],
        "hybrid-identities" => hybrid_identities(seed, 20)?,
        "dcr" => vec![col_oracle_equivalence(seed, 10)?, preimage_pairs(seed, 10, 100_000)?],
        "reductions" => vec![mac_reduction(seed, 10_000)?, commitment_reduction(seed, 10_000)?],
        "adaptive" => vec![adaptive_replacement(seed, 5)?],
        "acceptance" => {
            let mut all = Vec::new();
            for s in &SUITES[..5] {
                all.extend(run_suite(s, seed)?);
            }
            all.sort_by_key(|r| r.id);
            all
        }
        other => {
            return Err(Error::Parse(format!(
                "unknown suite {other:?}; expected one of {}",
                SUITES.join(", ")
            )))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_preimages_brute_force() {
        assert_eq!(distinct_preimage_probability(&[0; 8]), 1.0 - 1.0 / 8.0);
        assert_eq!(distinct_preimage_probability(&[0, 1, 2, 3, 0, 1, 2, 3]), 0.5);
        // explicit pair count: Pr[x ≠ x' | f(x) = f(x')] weighted by Pr[y]
        let f = [0, 0, 0, 1, 2, 2, 3, 3];
        let mut p = 0.0;
        for x in 0..8 {
            let same: Vec<usize> = (0..8).filter(|&z| f[z] == f[x]).collect();
            p += (1.0 / 8.0) * (same.len() - 1) as f64 / same.len() as f64;
        }
        assert!((distinct_preimage_probability(&f) - p).abs() < 1e-15);
    }

    #[test]
    fn small_runs() {
        assert!(oracle_core(1, 3, 2000).unwrap().checks[1].pass);
        assert!(non_collapse_signature().unwrap().pass());
        assert!(hybrid_identities(1, 3).unwrap().iter().all(|r| r.pass()));
        assert!(col_oracle_equivalence(1, 3).unwrap().pass());
        assert!(adaptive_replacement(1, 1).unwrap().pass());
        assert!(run_suite("nope", 1).is_err());
        let a = preimage_pairs(3, 2, 1000).unwrap();
        let b = preimage_pairs(3, 2, 1000).unwrap();
        assert_eq!(a, b);
    }
}
