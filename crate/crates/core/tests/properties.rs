use std::collections::BTreeMap;

use noncollapse::dcrpuzz::{col_exact, random_circuit_scheme, CollisionTriple};
use noncollapse::ncmo::oracle_exact;
use noncollapse::qsim::{random_circuit, Circuit, StateVector};
use noncollapse::{BitString, FiniteDist, SimRng};
use proptest::prelude::*;
use rand::SeedableRng;

const EPS: f64 = 1e-9;

fn dist_strategy(len: usize) -> impl Strategy<Value = FiniteDist> {
    prop::collection::vec(0.0f64..1.0, 1usize << len).prop_filter_map("zero mass", move |w| {
        let total: f64 = w.iter().sum();
        if total < 1e-6 {
            return None;
        }
        let entries = w
            .iter()
            .enumerate()
            .map(|(i, p)| (BitString::from_index(i, len), p / total));
        Some(FiniteDist::new(len, entries).unwrap())
    })
}

fn pair() -> impl Strategy<Value = (FiniteDist, FiniteDist)> {
    (1usize..=4).prop_flat_map(|n| (dist_strategy(n), dist_strategy(n)))
}

fn triple() -> impl Strategy<Value = (FiniteDist, FiniteDist, FiniteDist)> {
    (1usize..=4).prop_flat_map(|n| (dist_strategy(n), dist_strategy(n), dist_strategy(n)))
}

// Direct enumeration of the non-collapsing law: each read samples the full
// register before the collapse onto its measured prefix.
fn reference_law(c: &Circuit) -> BTreeMap<BitString, f64> {
    fn go(
        c: &Circuit,
        t: usize,
        state: StateVector,
        acc: BitString,
        p: f64,
        out: &mut BTreeMap<BitString, f64>,
    ) {
        if t == c.len() {
            *out.entry(acc).or_default() += p;
            return;
        }
        let step = &c.steps()[t];
        let mut s = state;
        for g in &step.gates {
            s.apply_gate(g).unwrap();
        }
        for v in BitString::all(c.qubits()) {
            let pv = s.amplitude(&v).norm_sqr();
            if pv < 1e-14 {
                continue;
            }
            let (next, _) = s.project(&v.prefix(step.measure)).unwrap();
            go(c, t + 1, next, acc.concat(&v).unwrap(), p * pv, out);
        }
    }
    let mut out = BTreeMap::new();
    go(c, 0, StateVector::zero(c.qubits()).unwrap(), BitString::EMPTY, 1.0, &mut out);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sd_is_a_metric((p, q, r) in triple()) {
        let pq = p.sd(&q).unwrap();
        prop_assert!((0.0..=1.0 + EPS).contains(&pq));
        prop_assert!((pq - q.sd(&p).unwrap()).abs() < EPS);
        prop_assert!(p.sd(&p).unwrap() < EPS);
        prop_assert!(pq <= p.sd(&r).unwrap() + r.sd(&q).unwrap() + EPS);
    }

    #[test]
    fn post_processing_never_increases_sd((p, q) in pair(), table in prop::collection::vec(0usize..4, 16)) {
        let f = |s: &BitString| BitString::from_index(table[s.index()], 2);
        let before = p.sd(&q).unwrap();
        let after = p.push_forward(f).unwrap().sd(&q.push_forward(f).unwrap()).unwrap();
        prop_assert!(after <= before + EPS);
        let k = p.bit_len() / 2;
        let marg = p.marginal_prefix(k).unwrap().sd(&q.marginal_prefix(k).unwrap()).unwrap();
        prop_assert!(marg <= before + EPS);
    }

    #[test]
    fn prefix_mass_chain_rule(p in (2usize..=4).prop_flat_map(dist_strategy), k in 1usize..=2) {
        let n = p.bit_len();
        let k = k.min(n - 1);
        for pre in BitString::all(k) {
            let mass = p.prefix_mass(&pre);
            if mass < 1e-9 {
                continue;
            }
            let cond = p.condition(&pre).unwrap();
            prop_assert_eq!(cond.bit_len(), n - k);
            for rest in BitString::all(n - k) {
                let full = pre.concat(&rest).unwrap();
                prop_assert!((cond.prob(&rest) * mass - p.prob(&full)).abs() < EPS);
            }
        }
    }

    #[test]
    fn mixture_is_linear((p, q) in pair(), w in 0.0f64..=1.0) {
        let n = p.bit_len();
        let m = FiniteDist::mixture(n, [(w, &p), (1.0 - w, &q)]).unwrap();
        for s in BitString::all(n) {
            prop_assert!((m.prob(&s) - w * p.prob(&s) - (1.0 - w) * q.prob(&s)).abs() < EPS);
        }
        prop_assert!(m.sd(&p).unwrap() <= (1.0 - w) * p.sd(&q).unwrap() + EPS);
    }

    #[test]
    fn bitstring_round_trips(v in any::<u64>(), len in 1usize..=64, k in 0usize..=64) {
        let mask = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
        let s = BitString::from_value((v & mask) as u128, len).unwrap();
        let text = s.to_string();
        prop_assert_eq!(text.len(), len);
        prop_assert_eq!(text.parse::<BitString>().unwrap(), s);
        let k = k.min(len);
        let joined = s.prefix(k).concat(&s.suffix(k)).unwrap();
        prop_assert_eq!(joined, s);
    }

    #[test]
    fn oracle_law_matches_enumeration(seed in any::<u64>(), qubits in 1usize..=3, steps in 1usize..=2) {
        let mut rng = SimRng::seed_from_u64(seed);
        let c = random_circuit(qubits, steps, &mut rng).unwrap();
        let law = oracle_exact(&c).unwrap();
        prop_assert!((law.total_mass() - 1.0).abs() < 1e-9);
        let reference = reference_law(&c);
        for (s, p) in law.iter() {
            prop_assert!((reference.get(s).copied().unwrap_or(0.0) - p).abs() < 1e-9);
        }
        for (s, p) in &reference {
            prop_assert!((law.prob(s) - p).abs() < 1e-9);
        }
    }

    #[test]
    fn collision_answers_are_exchangeable(seed in any::<u64>(), a in 1usize..=2, junk in 0usize..=1) {
        let mut rng = SimRng::seed_from_u64(seed);
        let scheme = random_circuit_scheme(1, a, junk, &mut rng).unwrap();
        let law = col_exact(&scheme, &BitString::EMPTY).unwrap();
        prop_assert!((law.total_mass() - 1.0).abs() < 1e-9);
        let swap = |s: &BitString| {
            let t = CollisionTriple::split(s, 1, a).unwrap();
            CollisionTriple { puzz: t.puzz, ans: t.ans2, ans2: t.ans }.concat()
        };
        let swapped = law.push_forward(swap).unwrap();
        prop_assert!(law.sd(&swapped).unwrap() < 1e-9);
        let puzz = law.marginal_prefix(1).unwrap();
        let samp = scheme.samp_law(&BitString::EMPTY).unwrap().marginal_prefix(1).unwrap();
        prop_assert!(puzz.sd(&samp).unwrap() < 1e-9);
    }
}
