use num_complex::Complex64;
use rand::Rng;

use super::gate::Gate;
use super::MAX_QUBITS;
use crate::bits::BitString;
use crate::dist::FiniteDist;
use crate::error::{Error, Result};

/// Outcomes whose Born probability falls below this are never emitted.
pub const PRUNE_TOL: f64 = 1e-12;
const READOUT_TOL: f64 = 1e-15;
const NORM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `qubits` qubits.
    pub fn zero(qubits: usize) -> Result<Self> {
        if qubits > MAX_QUBITS {
            return Err(Error::too_large("qubit count", MAX_QUBITS));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { qubits, amps })
    }

    pub fn basis(s: &BitString) -> Result<Self> {
        let mut v = Self::zero(s.len())?;
        v.amps[0] = Complex64::new(0.0, 0.0);
        v.amps[s.index()] = Complex64::new(1.0, 0.0);
        Ok(v)
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(Error::structural(format!(
                "{} amplitudes is not a power of two",
                amps.len()
            )));
        }
        let qubits = amps.len().trailing_zeros() as usize;
        if qubits > MAX_QUBITS {
            return Err(Error::too_large("qubit count", MAX_QUBITS));
        }
        let v = StateVector { qubits, amps };
        let n = v.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::structural(format!("state has squared norm {n}")));
        }
        Ok(v)
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, s: &BitString) -> Complex64 {
        self.amps[s.index()]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply_gate(&mut self, g: &Gate) -> Result<()> {
        g.validate(self.qubits)?;
        g.apply(&mut self.amps, self.qubits);
        Ok(())
    }

    /// Applies already validated gates without rechecking them.
    pub(crate) fn apply_gates_unchecked(&mut self, gates: &[Gate]) {
        for g in gates {
            g.apply(&mut self.amps, self.qubits);
        }
    }

    /// Born probabilities of each outcome on the first `m` qubits.
    pub fn outcome_probs(&self, m: usize) -> Vec<f64> {
        let block = 1usize << (self.qubits - m);
        self.amps
            .chunks(block)
            .map(|c| c.iter().map(|a| a.norm_sqr()).sum())
            .collect()
    }

    /// Projects onto outcome `u` of the first `u.len()` qubits and
    /// renormalizes. Returns the Born probability of `u`.
    pub fn project(&self, u: &BitString) -> Result<(StateVector, f64)> {
        let m = u.len();
        if m > self.qubits {
            return Err(Error::structural(format!(
                "measuring {m} qubits of a {}-qubit state",
                self.qubits
            )));
        }
        let block = 1usize << (self.qubits - m);
        let lo = u.index() * block;
        let p: f64 = self.amps[lo..lo + block].iter().map(|a| a.norm_sqr()).sum();
        if p <= PRUNE_TOL {
            return Err(Error::ImpossibleCondition(format!(
                "outcome {u} has probability {p}"
            )));
        }
        let scale = 1.0 / p.sqrt();
        let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (dst, src) in amps[lo..lo + block].iter_mut().zip(&self.amps[lo..lo + block]) {
            *dst = src * scale;
        }
        Ok((
            StateVector {
                qubits: self.qubits,
                amps,
            },
            p,
        ))
    }

    /// Samples the measurement of the first `m` qubits.
    pub fn measure_collapsing<R: Rng + ?Sized>(
        &self,
        m: usize,
        rng: &mut R,
    ) -> Result<(BitString, StateVector, f64)> {
        if m > self.qubits {
            return Err(Error::structural(format!(
                "measuring {m} qubits of a {}-qubit state",
                self.qubits
            )));
        }
        if m == 0 {
            return Ok((BitString::EMPTY, self.clone(), 1.0));
        }
        let probs = self.outcome_probs(m);
        let u = sample_outcome(&probs, rng);
        let (post, p) = self.project(&BitString::from_index(u, m))?;
        Ok((BitString::from_index(u, m), post, p))
    }

    /// Law of a full computational-basis readout.
    pub fn readout_distribution(&self) -> FiniteDist {
        let total: f64 = self
            .amps
            .iter()
            .map(|a| a.norm_sqr())
            .filter(|&p| p > READOUT_TOL)
            .sum();
        FiniteDist::new(
            self.qubits,
            self.amps
                .iter()
                .enumerate()
                .map(|(i, a)| (i, a.norm_sqr()))
                .filter(|&(_, p)| p > READOUT_TOL)
                .map(|(i, p)| (BitString::from_index(i, self.qubits), p / total)),
        )
        .expect("normalized state yields a distribution")
    }

    /// One full readout.
    pub fn sample_readout<R: Rng + ?Sized>(&self, rng: &mut R) -> BitString {
        let probs: Vec<f64> = self.amps.iter().map(|a| a.norm_sqr()).collect();
        BitString::from_index(sample_outcome(&probs, rng), self.qubits)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// Inverse-CDF draw over weights above [`PRUNE_TOL`], renormalized.
pub(crate) fn sample_outcome<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().filter(|&&p| p > PRUNE_TOL).sum();
    let target = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= PRUNE_TOL {
            continue;
        }
        last = i;
        acc += p;
        if target < acc {
            return i;
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SimRng;
    use rand::SeedableRng;

    fn bell() -> StateVector {
        let mut s = StateVector::zero(2).unwrap();
        s.apply_gate(&Gate::H(0)).unwrap();
        s.apply_gate(&Gate::Cnot {
            control: 0,
            target: 1,
        })
        .unwrap();
        s
    }

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn bell_state_from_gates() {
        let s = bell();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.amplitudes()[0].re - h).abs() < 1e-12);
        assert!((s.amplitudes()[3].re - h).abs() < 1e-12);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn measure_nothing_is_identity() {
        let s = bell();
        let mut rng = SimRng::seed_from_u64(1);
        let (u, post, p) = s.measure_collapsing(0, &mut rng).unwrap();
        assert!(u.is_empty());
        assert_eq!(post, s);
        assert_eq!(p, 1.0);
    }

    #[test]
    fn measuring_bell_collapses_both_qubits() {
        let s = bell();
        let mut rng = SimRng::seed_from_u64(2);
        for _ in 0..20 {
            let (u, post, p) = s.measure_collapsing(1, &mut rng).unwrap();
            assert!((p - 0.5).abs() < 1e-12);
            let both = u.concat(&u).unwrap();
            assert!((post.amplitude(&both).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_measurement() {
        let s = StateVector::basis(&bs("1")).unwrap();
        let mut rng = SimRng::seed_from_u64(3);
        let (u, _, p) = s.measure_collapsing(1, &mut rng).unwrap();
        assert_eq!(u, bs("1"));
        assert_eq!(p, 1.0);
    }

    #[test]
    fn readouts() {
        let z = StateVector::zero(3).unwrap();
        assert_eq!(z.readout_distribution(), FiniteDist::point(bs("000")));
        let mut h = StateVector::zero(1).unwrap();
        h.apply_gate(&Gate::H(0)).unwrap();
        let d = h.readout_distribution();
        assert!(d.sd(&FiniteDist::uniform(1)).unwrap() < 1e-12);
        let d = bell().readout_distribution();
        assert!((d.prob(&bs("00")) - 0.5).abs() < 1e-12);
        assert!((d.prob(&bs("11")) - 0.5).abs() < 1e-12);
        assert_eq!(d.support_size(), 2);
    }

    #[test]
    fn projection_on_zero_mass_is_impossible() {
        assert!(matches!(
            bell().project(&bs("01")),
            Err(Error::ImpossibleCondition(_))
        ));
    }

    #[test]
    fn bad_amplitudes_rejected() {
        let c = |x| Complex64::new(x, 0.0);
        assert!(StateVector::from_amplitudes(vec![c(1.0), c(1.0)]).is_err());
        assert!(StateVector::from_amplitudes(vec![c(1.0), c(0.0), c(0.0)]).is_err());
    }
}
