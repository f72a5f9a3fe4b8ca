//! Conjugate-coding one-shot MAC with a public random table.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{bit, bits, controlled_h, play, xor_oracle, GameReport};
use crate::bits::BitString;
use crate::dcrpuzz::{samplers, CollisionAdversary, CollisionTriple, DcrScheme, SampSource};
use crate::dist::{DistBuilder, FiniteDist};
use crate::error::{Error, Result};
use crate::qsim::{Gate, StateVector, MAX_QUBITS};
use crate::SimRng;

/// Cap on `n` and `ℓ_m`.
pub const MAX_MAC_BITS: usize = 6;

/// `pp` is the table `R: {0,1}^{2n} → {0,1}^{2n}`; `mvk` lists the
/// preimages of every verification key.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneShotMac {
    n: usize,
    msg_len: usize,
    table: Vec<usize>,
    inverse: Vec<Vec<usize>>,
}

/// Quantum signing key: `x` encoded in bases `θ`.
#[derive(Clone, Debug)]
pub struct SigningKey {
    pub state: StateVector,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacForgery {
    pub vk: BitString,
    pub m0: BitString,
    pub sigma0: BitString,
    pub m1: BitString,
    pub sigma1: BitString,
}

impl OneShotMac {
    pub fn toy(n: usize, msg_len: usize, rng: &mut SimRng) -> Result<Self> {
        if n == 0 || n > MAX_MAC_BITS {
            return Err(Error::too_large("MAC key qubits", MAX_MAC_BITS));
        }
        if msg_len == 0 || msg_len > n {
            return Err(Error::structural(format!(
                "message length {msg_len} must lie in 1..={n}"
            )));
        }
        let size = 1usize << (2 * n);
        let table: Vec<usize> = (0..size).map(|_| rng.gen_range(0..size)).collect();
        Self::from_table(n, msg_len, table)
    }

    pub fn from_table(n: usize, msg_len: usize, table: Vec<usize>) -> Result<Self> {
        let size = 1usize << (2 * n);
        if table.len() != size || table.iter().any(|&v| v >= size) {
            return Err(Error::structural("MAC table has the wrong shape"));
        }
        let mut inverse = vec![Vec::new(); size];
        for (pre, &vk) in table.iter().enumerate() {
            inverse[vk].push(pre);
        }
        Ok(OneShotMac {
            n,
            msg_len,
            table,
            inverse,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn msg_len(&self) -> usize {
        self.msg_len
    }

    pub fn vk_len(&self) -> usize {
        2 * self.n
    }

    pub fn sig_len(&self) -> usize {
        self.n
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn preimages(&self, vk: &BitString) -> &[usize] {
        &self.inverse[vk.index()]
    }

    /// Basis for qubit `i` under message `m`; positions past `ℓ_m` use `Z`.
    fn basis(&self, m: usize, i: usize) -> usize {
        if i < self.msg_len {
            bit(m, i, self.msg_len)
        } else {
            0
        }
    }

    pub fn signing_key(&self, x: usize, theta: usize) -> Result<SigningKey> {
        let mut state = StateVector::basis(&bits(x, self.n))?;
        for i in 0..self.n {
            if bit(theta, i, self.n) == 1 {
                state.apply_gate(&Gate::H(i))?;
            }
        }
        Ok(SigningKey { state })
    }

    /// `(x, θ) ← {0,1}^{2n}`, `vk = R(x‖θ)`.
    pub fn gen(&self, rng: &mut SimRng) -> Result<(BitString, SigningKey)> {
        let pre = rng.gen_range(0..self.table.len());
        self.gen_from(pre)
    }

    pub fn gen_from(&self, pre: usize) -> Result<(BitString, SigningKey)> {
        let (x, theta) = (pre >> self.n, pre & ((1 << self.n) - 1));
        Ok((bits(self.table[pre], 2 * self.n), self.signing_key(x, theta)?))
    }

    pub fn vk_law(&self) -> Result<FiniteDist> {
        let w = 1.0 / self.table.len() as f64;
        let mut b = DistBuilder::new(self.vk_len());
        for &vk in &self.table {
            b.add(bits(vk, self.vk_len()), w)?;
        }
        b.finish()
    }

    fn rotated(&self, sigk: &SigningKey, m: &BitString) -> Result<StateVector> {
        if m.len() != self.msg_len {
            return Err(Error::structural(format!(
                "{}-bit message for a {}-bit MAC",
                m.len(),
                self.msg_len
            )));
        }
        let mut s = sigk.state.clone();
        for i in 0..self.msg_len {
            if m.get(i) {
                s.apply_gate(&Gate::H(i))?;
            }
        }
        Ok(s)
    }

    /// Measures qubit `i` in `Z` if `m_i = 0`, in `X` otherwise.
    pub fn sign(&self, sigk: SigningKey, m: &BitString, rng: &mut SimRng) -> Result<BitString> {
        Ok(self.rotated(&sigk, m)?.sample_readout(rng))
    }

    pub fn sign_law(&self, sigk: &SigningKey, m: &BitString) -> Result<FiniteDist> {
        Ok(self.rotated(sigk, m)?.readout_distribution())
    }

    /// Accepts iff some preimage `(x, θ)` of `vk` agrees with `σ` on every
    /// position whose basis matches.
    pub fn ver(&self, vk: &BitString, sigma: &BitString, m: &BitString) -> bool {
        if vk.len() != self.vk_len() || sigma.len() != self.n || m.len() != self.msg_len {
            return false;
        }
        let (mi, si) = (m.index(), sigma.index());
        self.inverse[vk.index()].iter().any(|&pre| {
            let (x, theta) = (pre >> self.n, pre & ((1 << self.n) - 1));
            (0..self.n).all(|i| {
                self.basis(mi, i) != bit(theta, i, self.n) || bit(si, i, self.n) == bit(x, i, self.n)
            })
        })
    }

    pub fn forgery_wins(&self, f: &MacForgery) -> bool {
        f.m0 != f.m1 && self.ver(&f.vk, &f.sigma0, &f.m0) && self.ver(&f.vk, &f.sigma1, &f.m1)
    }

    /// Exact law of `vk ‖ m ‖ σ` for a uniform message and honest signing.
    pub fn samp_law(&self) -> Result<FiniteDist> {
        let n = self.n;
        let len = self.vk_len() + self.msg_len + n;
        let w = 1.0 / (self.table.len() << self.msg_len) as f64;
        let mut b = DistBuilder::new(len);
        for (pre, &vk) in self.table.iter().enumerate() {
            let (x, theta) = (pre >> n, pre & ((1 << n) - 1));
            for m in 0..1usize << self.msg_len {
                let free: Vec<usize> = (0..n)
                    .filter(|&i| self.basis(m, i) != bit(theta, i, n))
                    .collect();
                let p = w / (1usize << free.len()) as f64;
                for choice in 0..1usize << free.len() {
                    let mut sigma = x;
                    for (j, &i) in free.iter().enumerate() {
                        let mask = 1 << (n - 1 - i);
                        sigma = (sigma & !mask) | (bit(choice, j, free.len()) << (n - 1 - i));
                    }
                    let key = (((vk << self.msg_len) | m) << n) | sigma;
                    b.add(bits(key, len), p)?;
                }
            }
        }
        b.finish()
    }

    fn forgery_from(&self, t: &CollisionTriple) -> MacForgery {
        let l = self.msg_len;
        MacForgery {
            vk: t.puzz,
            m0: t.ans.prefix(l),
            sigma0: t.ans.suffix(l),
            m1: t.ans2.prefix(l),
            sigma1: t.ans2.suffix(l),
        }
    }
}

/// `puzz = vk`, `ans = (m, σ)`; sampler given as a law.
pub fn mac_to_dcrpuzz(mac: &OneShotMac) -> Result<DcrScheme> {
    DcrScheme::single(
        mac.vk_len(),
        mac.msg_len + mac.n,
        SampSource::Law(mac.samp_law()?),
    )
}

/// Same scheme with a gate-level `V_pp` on registers
/// `vk ‖ m ‖ σ ‖ x ‖ θ`.
pub fn mac_to_dcrpuzz_circuit(mac: &OneShotMac) -> Result<DcrScheme> {
    let (n, l) = (mac.n, mac.msg_len);
    let qubits = 5 * n + l;
    if qubits > MAX_QUBITS {
        return Err(Error::too_large("MAC commit circuit qubits", MAX_QUBITS));
    }
    let (m0, s0, x0, t0) = (2 * n, 2 * n + l, 3 * n + l, 4 * n + l);
    let mut gates: Vec<Gate> = (m0..s0).chain(x0..qubits).map(Gate::H).collect();
    for i in 0..n {
        gates.push(Gate::Cnot {
            control: x0 + i,
            target: s0 + i,
        });
        gates.push(controlled_h(t0 + i, s0 + i));
        if i < l {
            gates.push(controlled_h(m0 + i, s0 + i));
        }
    }
    let targets = (0..2 * n).chain(x0..qubits).collect();
    gates.push(xor_oracle(targets, &mac.table, 2 * n));
    DcrScheme::single(2 * n, l + n, SampSource::Circuit { qubits, gates })
}

/// Exact winning probability of the breaker that turns each triple into
/// `(vk, m_0, σ_0, m_1, σ_1)`.
pub fn mac_break_exact(
    mac: &OneShotMac,
    scheme: &DcrScheme,
    source: &dyn CollisionAdversary,
) -> Result<f64> {
    let mut win = 0.0;
    for (pp, ppp) in scheme.setup.iter() {
        for (t, p) in source.law(scheme, pp)?.iter() {
            let t = CollisionTriple::split(t, scheme.puzz_len, scheme.ans_len)?;
            if mac.forgery_wins(&mac.forgery_from(&t)) {
                win += ppp * p;
            }
        }
    }
    Ok(win)
}

/// Plays the two-message forgery game with triples from `source`.
pub fn mac_break_via_collision(
    mac: &OneShotMac,
    scheme: &DcrScheme,
    source: &dyn CollisionAdversary,
    trials: u64,
    rng: &mut SimRng,
) -> Result<GameReport> {
    let exact = mac_break_exact(mac, scheme, source)?;
    let draw = samplers(scheme, source)?;
    let setup = scheme.setup.sampler();
    let successes = play(trials, rng, |r| {
        let pp = setup.sample(r);
        Ok(mac.forgery_wins(&mac.forgery_from(&draw[&pp](r)?)))
    })?;
    Ok(GameReport {
        game: format!("mac-forgery/{}", source.name()),
        trials,
        successes,
        exact: Some(exact),
    })
}

/// Measures the key once in `Z` and offers the outcome for `0^ℓ` and `1^ℓ`.
fn naive_forgery(mac: &OneShotMac, rng: &mut SimRng) -> Result<MacForgery> {
    let (vk, sigk) = mac.gen(rng)?;
    let zeros = BitString::zeros(mac.msg_len);
    let ones = bits((1 << mac.msg_len) - 1, mac.msg_len);
    let z = mac.sign(sigk, &zeros, rng)?;
    Ok(MacForgery {
        vk,
        m0: zeros,
        sigma0: z,
        m1: ones,
        sigma1: z,
    })
}

pub fn naive_forger_exact(mac: &OneShotMac) -> Result<f64> {
    let zeros = BitString::zeros(mac.msg_len);
    let ones = bits((1 << mac.msg_len) - 1, mac.msg_len);
    let w = 1.0 / mac.table.len() as f64;
    let mut win = 0.0;
    for pre in 0..mac.table.len() {
        let (vk, sigk) = mac.gen_from(pre)?;
        for (z, p) in mac.sign_law(&sigk, &zeros)?.iter() {
            if mac.ver(&vk, z, &zeros) && mac.ver(&vk, z, &ones) {
                win += w * p;
            }
        }
    }
    Ok(win)
}

pub fn naive_forger_game(mac: &OneShotMac, trials: u64, rng: &mut SimRng) -> Result<GameReport> {
    let successes = play(trials, rng, |r| Ok(mac.forgery_wins(&naive_forgery(mac, r)?)))?;
    Ok(GameReport {
        game: "mac-forgery/naive".into(),
        trials,
        successes,
        exact: Some(naive_forger_exact(mac)?),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgorithmCMac {
    pub forgery: MacForgery,
    /// Regenerations that produced a different `vk`.
    pub retries: u64,
}

/// Generates `vk` and one signature, then regenerates keys until the same
/// `vk` reappears and signs a fresh message with the new key.
pub fn algorithm_c_mac(mac: &OneShotMac, budget: u64, rng: &mut SimRng) -> Result<AlgorithmCMac> {
    let sign_random = |sigk, rng: &mut SimRng| -> Result<(BitString, BitString)> {
        let m = bits(rng.gen_range(0..1usize << mac.msg_len), mac.msg_len);
        Ok((m, mac.sign(sigk, &m, rng)?))
    };
    let (vk, sigk) = mac.gen(rng)?;
    let (m0, sigma0) = sign_random(sigk, rng)?;
    for attempt in 1..=budget {
        let (vk2, sigk2) = mac.gen(rng)?;
        if vk2 == vk {
            let (m1, sigma1) = sign_random(sigk2, rng)?;
            return Ok(AlgorithmCMac {
                forgery: MacForgery {
                    vk,
                    m0,
                    sigma0,
                    m1,
                    sigma1,
                },
                retries: attempt - 1,
            });
        }
    }
    Err(Error::RetryBudgetExhausted { budget })
}

/// Exact law of algorithm C's output `vk ‖ m_0 ‖ σ_0 ‖ m_1 ‖ σ_1`, built from
/// state-vector signing.
pub fn algorithm_c_mac_law(mac: &OneShotMac) -> Result<FiniteDist> {
    let (vl, l, n) = (mac.vk_len(), mac.msg_len, mac.n);
    let vk_law = mac.vk_law()?;
    let mut out = DistBuilder::new(vl + 2 * (l + n));
    for (vk, pvk) in vk_law.iter() {
        let pres = mac.preimages(vk);
        let w = 1.0 / (pres.len() << l) as f64;
        let mut cond = DistBuilder::new(l + n);
        for &pre in pres {
            let (_, sigk) = mac.gen_from(pre)?;
            for m in 0..1usize << l {
                let m = bits(m, l);
                for (sigma, p) in mac.sign_law(&sigk, &m)?.iter() {
                    cond.add(m.concat(sigma)?, w * p)?;
                }
            }
        }
        let cond = cond.finish()?;
        out.add_scaled(pvk, &FiniteDist::point(*vk).product(&cond.product(&cond)?)?)?;
    }
    out.finish()
}
