//! Toy one-shot MACs and commitments, their collision-puzzle reductions and
//! game evaluators.

mod commitment;
mod mac;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::Result;
use crate::SimRng;

pub use commitment::{
    algorithm_c_com, algorithm_c_com_law, com_break_exact, com_break_via_collision,
    com_to_dcrpuzz, hiding_and_correctness_audit, pair_parity_success, AbstractCommitment,
    AuditReport, ComVariant, CommitmentScheme, OpeningValue, Regeneration, SenderState,
    ToyCommitment,
};
pub use mac::{
    algorithm_c_mac, algorithm_c_mac_law, mac_break_exact, mac_break_via_collision,
    mac_to_dcrpuzz, mac_to_dcrpuzz_circuit, naive_forger_exact, naive_forger_game, AlgorithmCMac,
    MacForgery, OneShotMac, SigningKey, MAX_MAC_BITS,
};

pub fn toy_mac(n: usize, msg_len: usize, rng: &mut SimRng) -> Result<OneShotMac> {
    OneShotMac::toy(n, msg_len, rng)
}

pub fn toy_commitment(n: usize, compression: usize, rng: &mut SimRng) -> Result<ToyCommitment> {
    ToyCommitment::toy(n, compression, rng)
}

/// Outcome of playing a security or correctness game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameReport {
    pub game: String,
    pub trials: u64,
    pub successes: u64,
    /// Winning probability when it can be enumerated.
    pub exact: Option<f64>,
}

impl GameReport {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    /// Binomial standard error of [`rate`](Self::rate) around the exact value.
    pub fn sigma(&self) -> Option<f64> {
        let p = self.exact?;
        (self.trials > 0).then(|| (p * (1.0 - p) / self.trials as f64).sqrt())
    }

    pub fn empirical_gap(&self) -> Option<f64> {
        self.exact.map(|p| (self.rate() - p).abs())
    }
}

/// Plays `trials` independent rounds with per-trial seeds drawn from `rng`.
pub(crate) fn play<F>(trials: u64, rng: &mut SimRng, round: F) -> Result<u64>
where
    F: Fn(&mut SimRng) -> Result<bool> + Sync,
{
    let base: u64 = rng.gen();
    let wins = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut r = SimRng::seed_from_u64(base);
            r.set_stream(i);
            round(&mut r).map(u64::from)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(wins.into_iter().sum())
}

/// Bit `i` of an `n`-bit index, bit 0 being the most significant.
pub(crate) fn bit(v: usize, i: usize, n: usize) -> usize {
    (v >> (n - 1 - i)) & 1
}

pub(crate) fn bits(v: usize, n: usize) -> BitString {
    BitString::from_index(v, n)
}

/// `H` on `target` when `control` is set.
pub(crate) fn controlled_h(control: usize, target: usize) -> crate::qsim::Gate {
    use num_complex::Complex64;
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    crate::qsim::Gate::Matrix {
        targets: vec![control, target],
        matrix: vec![one, z, z, z, z, one, z, z, z, z, h, h, z, z, h, -h],
    }
}

/// Permutation `y ⊕= f(x)` on `targets = y ‖ x`.
pub(crate) fn xor_oracle(targets: Vec<usize>, f: &[usize], in_bits: usize) -> crate::qsim::Gate {
    let mask = (1usize << in_bits) - 1;
    let table = (0..1usize << targets.len())
        .map(|i| {
            let x = i & mask;
            (((i >> in_bits) ^ f[x]) << in_bits) | x
        })
        .collect();
    crate::qsim::Gate::Permutation { targets, table }
}
