//! Exact finite distributions over fixed-length bit strings.
//!
//! Every distributional identity in the crate is checked by building two
//! [`FiniteDist`] values and comparing them with [`sd`]. Support maps iterate
//! in lexicographic order, so seeded sampling is reproducible bit for bit.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};

/// Tolerance on total mass when validating a distribution.
pub const PROB_TOL: f64 = 1e-9;

/// Exact probability distribution over `{0,1}^len`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteDist {
    len: usize,
    probs: BTreeMap<BitString, f64>,
}

/// Accumulates weighted mass before validation. Repeated keys add up.
#[derive(Clone, Debug)]
pub struct DistBuilder {
    len: usize,
    probs: BTreeMap<BitString, f64>,
}

impl DistBuilder {
    pub fn new(len: usize) -> Self {
        DistBuilder {
            len,
            probs: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, s: BitString, p: f64) -> Result<()> {
        if s.len() != self.len {
            return Err(Error::structural(format!(
                "string {s} has length {}, expected {}",
                s.len(),
                self.len
            )));
        }
        if p != 0.0 {
            *self.probs.entry(s).or_insert(0.0) += p;
        }
        Ok(())
    }

    /// Adds `weight * d` entry by entry.
    pub fn add_scaled(&mut self, weight: f64, d: &FiniteDist) -> Result<()> {
        for (s, p) in d.iter() {
            self.add(*s, weight * p)?;
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn bit_len(&self) -> usize {
        self.len
    }

    /// Validates that the accumulated mass is a probability distribution.
    pub fn finish(self) -> Result<FiniteDist> {
        FiniteDist::from_map(self.len, self.probs)
    }

    /// Renormalizes the accumulated positive weights.
    pub fn finish_normalized(self) -> Result<FiniteDist> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::ImpossibleCondition(
                "no positive mass to normalize".into(),
            ));
        }
        let probs = self
            .probs
            .into_iter()
            .map(|(s, p)| (s, p / total))
            .collect();
        FiniteDist::from_map(self.len, probs)
    }
}

impl FiniteDist {
    /// Builds a distribution, summing duplicate keys.
    pub fn new(len: usize, entries: impl IntoIterator<Item = (BitString, f64)>) -> Result<Self> {
        let mut b = DistBuilder::new(len);
        for (s, p) in entries {
            b.add(s, p)?;
        }
        b.finish()
    }

    /// Builds a distribution from nonnegative weights, normalizing them.
    pub fn from_weights(
        len: usize,
        entries: impl IntoIterator<Item = (BitString, f64)>,
    ) -> Result<Self> {
        let mut b = DistBuilder::new(len);
        for (s, w) in entries {
            if w < 0.0 {
                return Err(Error::structural(format!("negative weight {w} for {s}")));
            }
            b.add(s, w)?;
        }
        b.finish_normalized()
    }

    fn from_map(len: usize, probs: BTreeMap<BitString, f64>) -> Result<Self> {
        let mut clean = BTreeMap::new();
        let mut total = 0.0;
        for (s, p) in probs {
            if s.len() != len {
                return Err(Error::structural(format!(
                    "string {s} has length {}, expected {len}",
                    s.len()
                )));
            }
            if !p.is_finite() || p < -PROB_TOL {
                return Err(Error::structural(format!("invalid probability {p} for {s}")));
            }
            if p > 0.0 {
                total += p;
                clean.insert(s, p);
            }
        }
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::structural(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(FiniteDist { len, probs: clean })
    }

    pub fn point(s: BitString) -> Self {
        FiniteDist {
            len: s.len(),
            probs: BTreeMap::from([(s, 1.0)]),
        }
    }

    pub fn uniform(len: usize) -> Self {
        let p = 1.0 / (1u64 << len) as f64;
        FiniteDist {
            len,
            probs: BitString::all(len).map(|s| (s, p)).collect(),
        }
    }

    /// Common string length of the support.
    pub fn bit_len(&self) -> usize {
        self.len
    }

    pub fn prob(&self, s: &BitString) -> f64 {
        self.probs.get(s).copied().unwrap_or(0.0)
    }

    /// Support entries in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (&BitString, f64)> + '_ {
        self.probs.iter().map(|(s, p)| (s, *p))
    }

    pub fn support_size(&self) -> usize {
        self.probs.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.values().sum()
    }

    /// Total mass of strings that begin with `prefix`.
    pub fn prefix_mass(&self, prefix: &BitString) -> f64 {
        self.iter()
            .filter(|(s, _)| s.starts_with(prefix))
            .map(|(_, p)| p)
            .sum()
    }

    pub fn sd(&self, other: &FiniteDist) -> Result<f64> {
        sd(self, other)
    }

    pub fn condition(&self, prefix: &BitString) -> Result<FiniteDist> {
        condition(self, prefix)
    }

    /// Restriction to the strings satisfying `keep`, renormalized.
    pub fn condition_by(&self, keep: impl Fn(&BitString) -> bool) -> Result<FiniteDist> {
        let mut b = DistBuilder::new(self.len);
        for (s, p) in self.iter().filter(|(s, _)| keep(s)) {
            b.add(*s, p)?;
        }
        if !(b.total() > 0.0) {
            return Err(Error::ImpossibleCondition("event has zero mass".into()));
        }
        b.finish_normalized()
    }

    pub fn push_forward(&self, f: impl Fn(&BitString) -> BitString) -> Result<FiniteDist> {
        self.try_push_forward(|s| Ok(f(s)))
    }

    /// Push-forward through a fallible map; output lengths must agree.
    pub fn try_push_forward(
        &self,
        f: impl Fn(&BitString) -> Result<BitString>,
    ) -> Result<FiniteDist> {
        let mut out: Option<DistBuilder> = None;
        for (s, p) in self.iter() {
            let image = f(s)?;
            let b = out.get_or_insert_with(|| DistBuilder::new(image.len()));
            b.add(image, p).map_err(|_| {
                Error::structural("push-forward map produced inconsistent output lengths")
            })?;
        }
        match out {
            Some(b) => b.finish(),
            None => Err(Error::structural("push-forward of an empty distribution")),
        }
    }

    /// Marginal on the first `k` bits.
    pub fn marginal_prefix(&self, k: usize) -> Result<FiniteDist> {
        if k > self.len {
            return Err(Error::structural(format!(
                "prefix length {k} exceeds string length {}",
                self.len
            )));
        }
        self.push_forward(|s| s.prefix(k))
    }

    /// Independent product; keys are concatenated `self ‖ other`.
    pub fn product(&self, other: &FiniteDist) -> Result<FiniteDist> {
        let mut b = DistBuilder::new(self.len + other.len);
        for (a, pa) in self.iter() {
            for (c, pc) in other.iter() {
                b.add(a.concat(c)?, pa * pc)?;
            }
        }
        b.finish()
    }

    /// Convex combination of distributions of common length.
    pub fn mixture<'a>(
        len: usize,
        components: impl IntoIterator<Item = (f64, &'a FiniteDist)>,
    ) -> Result<FiniteDist> {
        let mut b = DistBuilder::new(len);
        for (w, d) in components {
            b.add_scaled(w, d)?;
        }
        b.finish()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BitString {
        sample(self, rng)
    }

    /// Precomputes a cumulative table for repeated draws. Draws coincide
    /// with [`FiniteDist::sample`] for the same random stream.
    pub fn sampler(&self) -> DistSampler {
        let mut acc = 0.0;
        let mut keys = Vec::with_capacity(self.probs.len());
        let mut cumulative = Vec::with_capacity(self.probs.len());
        for (s, p) in self.iter() {
            acc += p;
            keys.push(*s);
            cumulative.push(acc);
        }
        DistSampler { keys, cumulative }
    }

    pub fn to_json(&self) -> DistJson {
        DistJson {
            length: self.len,
            probs: self.iter().map(|(s, p)| (s.to_string(), p)).collect(),
        }
    }

    pub fn from_json(j: &DistJson) -> Result<FiniteDist> {
        let entries = j
            .probs
            .iter()
            .map(|(s, p)| Ok((s.parse::<BitString>()?, *p)))
            .collect::<Result<Vec<_>>>()?;
        FiniteDist::new(j.length, entries)
    }
}

/// Serialized form `{"length": n, "probs": {"<bits>": p, ...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistJson {
    pub length: usize,
    pub probs: BTreeMap<String, f64>,
}

impl Serialize for FiniteDist {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for FiniteDist {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = DistJson::deserialize(d)?;
        FiniteDist::from_json(&j).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug)]
pub struct DistSampler {
    keys: Vec<BitString>,
    cumulative: Vec<f64>,
}

impl DistSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BitString {
        let u: f64 = rng.gen();
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.keys[i.min(self.keys.len() - 1)]
    }
}

/// Statistical distance `½ Σ |p(s) − q(s)|` over the union of supports.
pub fn sd(p: &FiniteDist, q: &FiniteDist) -> Result<f64> {
    if p.len != q.len {
        return Err(Error::structural(format!(
            "statistical distance between lengths {} and {}",
            p.len, q.len
        )));
    }
    let mut total = 0.0;
    for (s, ps) in p.iter() {
        total += (ps - q.prob(s)).abs();
    }
    for (s, qs) in q.iter() {
        if !p.probs.contains_key(s) {
            total += qs;
        }
    }
    Ok((0.5 * total).min(1.0))
}

/// Distribution of the suffix given that the string starts with `prefix`.
pub fn condition(d: &FiniteDist, prefix: &BitString) -> Result<FiniteDist> {
    if prefix.len() > d.len {
        return Err(Error::structural(format!(
            "prefix of length {} longer than strings of length {}",
            prefix.len(),
            d.len
        )));
    }
    let k = prefix.len();
    let mut b = DistBuilder::new(d.len - k);
    for (s, p) in d.iter().filter(|(s, _)| s.starts_with(prefix)) {
        b.add(s.suffix(k), p)?;
    }
    if !(b.total() > 0.0) {
        return Err(Error::ImpossibleCondition(format!(
            "prefix {prefix} has zero mass"
        )));
    }
    b.finish_normalized()
}

pub fn push_forward(d: &FiniteDist, f: impl Fn(&BitString) -> BitString) -> Result<FiniteDist> {
    d.push_forward(f)
}

/// Inverse-CDF draw in lexicographic support order.
pub fn sample<R: Rng + ?Sized>(d: &FiniteDist, rng: &mut R) -> BitString {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = BitString::EMPTY;
    for (s, p) in d.iter() {
        acc += p;
        last = *s;
        if u < acc {
            return *s;
        }
    }
    last
}

/// Raw counts from a batch of samples.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDist {
    len: usize,
    counts: BTreeMap<BitString, u64>,
    shots: u64,
}

impl EmpiricalDist {
    pub fn new(len: usize) -> Self {
        EmpiricalDist {
            len,
            counts: BTreeMap::new(),
            shots: 0,
        }
    }

    pub fn record(&mut self, s: BitString) -> Result<()> {
        if s.len() != self.len {
            return Err(Error::structural(format!(
                "sample {s} has length {}, expected {}",
                s.len(),
                self.len
            )));
        }
        *self.counts.entry(s).or_insert(0) += 1;
        self.shots += 1;
        Ok(())
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn count(&self, s: &BitString) -> u64 {
        self.counts.get(s).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> impl Iterator<Item = (&BitString, u64)> + '_ {
        self.counts.iter().map(|(s, c)| (s, *c))
    }

    pub fn to_dist(&self) -> Result<FiniteDist> {
        if self.shots == 0 {
            return Err(Error::structural("empirical distribution with no samples"));
        }
        let n = self.shots as f64;
        FiniteDist::new(self.len, self.counts().map(|(s, c)| (*s, c as f64 / n)))
    }
}

/// Tallies a nonempty batch of equal-length samples.
pub fn empirical<'a>(
    samples: impl IntoIterator<Item = &'a BitString>,
) -> Result<(EmpiricalDist, FiniteDist)> {
    let mut it = samples.into_iter().peekable();
    let len = it
        .peek()
        .map(|s| s.len())
        .ok_or_else(|| Error::structural("empirical distribution of an empty sample"))?;
    let mut e = EmpiricalDist::new(len);
    for s in it {
        e.record(*s)?;
    }
    let d = e.to_dist()?;
    Ok((e, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SimRng;
    use rand::SeedableRng;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn dist(len: usize, entries: &[(&str, f64)]) -> FiniteDist {
        FiniteDist::new(len, entries.iter().map(|(s, p)| (bs(s), *p))).unwrap()
    }

    #[test]
    fn sd_examples() {
        let d = dist(2, &[("00", 0.5), ("01", 0.25), ("11", 0.25)]);
        assert_eq!(sd(&d, &d).unwrap(), 0.0);
        let zero = FiniteDist::point(bs("0"));
        let one = FiniteDist::point(bs("1"));
        assert_eq!(sd(&zero, &one).unwrap(), 1.0);
        let skew = dist(1, &[("0", 0.75), ("1", 0.25)]);
        assert!((sd(&FiniteDist::uniform(1), &skew).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn sd_rejects_length_mismatch() {
        let e = sd(&FiniteDist::uniform(1), &FiniteDist::uniform(2)).unwrap_err();
        assert!(matches!(e, Error::Structural(_)));
    }

    #[test]
    fn condition_examples() {
        let d = dist(2, &[("00", 0.5), ("01", 0.25), ("11", 0.25)]);
        let c = condition(&d, &bs("0")).unwrap();
        assert!((c.prob(&bs("0")) - 2.0 / 3.0).abs() < 1e-12);
        assert!((c.prob(&bs("1")) - 1.0 / 3.0).abs() < 1e-12);

        let c = condition(&FiniteDist::point(bs("10")), &bs("1")).unwrap();
        assert_eq!(c, FiniteDist::point(bs("0")));

        let d = dist(2, &[("00", 0.5), ("11", 0.5)]);
        assert_eq!(condition(&d, &bs("1")).unwrap(), FiniteDist::point(bs("1")));
    }

    #[test]
    fn condition_on_zero_mass_is_distinct_error() {
        let d = dist(2, &[("00", 0.5), ("01", 0.5)]);
        assert!(matches!(
            condition(&d, &bs("1")),
            Err(Error::ImpossibleCondition(_))
        ));
        assert!(matches!(
            condition(&d, &bs("001")),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn push_forward_examples() {
        let d = dist(2, &[("00", 0.5), ("01", 0.25), ("11", 0.25)]);
        assert_eq!(d.push_forward(|s| *s).unwrap(), d);
        assert_eq!(
            d.push_forward(|_| bs("10")).unwrap(),
            FiniteDist::point(bs("10"))
        );
        let u2 = FiniteDist::uniform(2);
        let dropped = u2.push_forward(|s| s.prefix(1)).unwrap();
        assert!(sd(&dropped, &FiniteDist::uniform(1)).unwrap() < 1e-15);
    }

    #[test]
    fn push_forward_rejects_ragged_outputs() {
        let u = FiniteDist::uniform(1);
        let e = u
            .push_forward(|s| if s.get(0) { bs("1") } else { bs("00") })
            .unwrap_err();
        assert!(matches!(e, Error::Structural(_)));
    }

    #[test]
    fn invalid_mass_rejected() {
        assert!(FiniteDist::new(1, [(bs("0"), 0.5)]).is_err());
        assert!(FiniteDist::new(1, [(bs("0"), 1.5), (bs("1"), -0.5)]).is_err());
        assert!(FiniteDist::new(1, [(bs("00"), 1.0)]).is_err());
    }

    #[test]
    fn sampling_examples() {
        let mut rng = SimRng::seed_from_u64(7);
        let pm = FiniteDist::point(bs("01"));
        for _ in 0..10 {
            assert_eq!(pm.sample(&mut rng), bs("01"));
        }

        let u = FiniteDist::uniform(1);
        let zeros = (0..100_000)
            .filter(|_| !u.sample(&mut rng).get(0))
            .count();
        assert!((zeros as f64 / 1e5 - 0.5).abs() < 0.01);

        let d = dist(2, &[("00", 0.1), ("01", 0.2), ("10", 0.3), ("11", 0.4)]);
        let mut a = SimRng::seed_from_u64(99);
        let mut b = SimRng::seed_from_u64(99);
        let xs: Vec<_> = (0..50).map(|_| d.sample(&mut a)).collect();
        let ys: Vec<_> = (0..50).map(|_| d.sample(&mut b)).collect();
        assert_eq!(xs, ys);

        let table = d.sampler();
        let mut c = SimRng::seed_from_u64(99);
        let zs: Vec<_> = (0..50).map(|_| table.sample(&mut c)).collect();
        assert_eq!(xs, zs);
    }

    #[test]
    fn empirical_examples() {
        let s = [bs("0"), bs("0"), bs("1"), bs("1")];
        let (e, d) = empirical(&s).unwrap();
        assert_eq!(e.shots(), 4);
        assert_eq!(d, FiniteDist::uniform(1));

        let (_, d) = empirical(&[bs("1")]).unwrap();
        assert_eq!(d, FiniteDist::point(bs("1")));

        assert!(empirical(&[]).is_err());
        assert!(empirical(&[bs("1"), bs("10")]).is_err());
    }

    #[test]
    fn empirical_converges_on_three_bits() {
        let truth = dist(
            3,
            &[
                ("000", 0.05),
                ("001", 0.15),
                ("010", 0.1),
                ("011", 0.2),
                ("101", 0.3),
                ("111", 0.2),
            ],
        );
        let mut rng = SimRng::seed_from_u64(3);
        let table = truth.sampler();
        let draws: Vec<_> = (0..100_000).map(|_| table.sample(&mut rng)).collect();
        let (_, emp) = empirical(&draws).unwrap();
        assert!(sd(&emp, &truth).unwrap() <= 0.01);
    }

    #[test]
    fn json_round_trip_format() {
        let d = dist(2, &[("00", 0.5), ("11", 0.5)]);
        let text = serde_json::to_string(&d).unwrap();
        assert_eq!(text, r#"{"length":2,"probs":{"00":0.5,"11":0.5}}"#);
        let back: FiniteDist = serde_json::from_str(&text).unwrap();
        assert_eq!(back, d);
    }
}
