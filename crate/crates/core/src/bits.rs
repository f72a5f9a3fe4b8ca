//! Fixed-capacity bit strings.
//!
//! Bits are stored right-aligned in a `u128`: the first bit of the string is
//! the most significant of the `len` low bits. This makes the string's value
//! coincide with the computational-basis index used by the simulator, where
//! qubit 0 is the most significant bit.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Maximum number of bits a [`BitString`] can hold.
pub const MAX_BITS: usize = 128;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    bits: u128,
    len: u8,
}

fn mask(len: usize) -> u128 {
    if len >= 128 {
        u128::MAX
    } else {
        (1u128 << len) - 1
    }
}

impl BitString {
    /// The empty string.
    pub const EMPTY: BitString = BitString { bits: 0, len: 0 };

    /// Builds a string of `len` bits whose big-endian value is `value`.
    pub fn from_value(value: u128, len: usize) -> Result<Self> {
        if len > MAX_BITS {
            return Err(Error::too_large("bit string length", MAX_BITS));
        }
        if value & !mask(len) != 0 {
            return Err(Error::structural(format!(
                "value {value} does not fit in {len} bits"
            )));
        }
        Ok(BitString {
            bits: value,
            len: len as u8,
        })
    }

    /// Like [`BitString::from_value`] but truncates `value` to `len` bits.
    /// Panics if `len` exceeds [`MAX_BITS`].
    pub fn from_index(value: usize, len: usize) -> Self {
        assert!(len <= MAX_BITS, "bit string longer than {MAX_BITS}");
        BitString {
            bits: (value as u128) & mask(len),
            len: len as u8,
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self::from_index(0, len)
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        if bits.len() > MAX_BITS {
            return Err(Error::too_large("bit string length", MAX_BITS));
        }
        let value = bits.iter().fold(0u128, |acc, &b| (acc << 1) | b as u128);
        Ok(BitString {
            bits: value,
            len: bits.len() as u8,
        })
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Big-endian value of the string.
    pub fn value(&self) -> u128 {
        self.bits
    }

    /// Value as a `usize` index. Panics if it does not fit.
    pub fn index(&self) -> usize {
        usize::try_from(self.bits).expect("bit string value exceeds usize")
    }

    /// Bit `i`, counting from the left.
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len(), "bit index {i} out of range {}", self.len);
        (self.bits >> (self.len() - 1 - i)) & 1 == 1
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    pub fn count_ones(&self) -> u32 {
        self.bits.count_ones()
    }

    /// First `k` bits.
    pub fn prefix(&self, k: usize) -> BitString {
        assert!(k <= self.len(), "prefix {k} longer than string {}", self.len);
        BitString {
            bits: if k == 0 { 0 } else { self.bits >> (self.len() - k) },
            len: k as u8,
        }
    }

    /// Everything from bit `k` on.
    pub fn suffix(&self, k: usize) -> BitString {
        assert!(k <= self.len(), "suffix start {k} past string {}", self.len);
        let rest = self.len() - k;
        BitString {
            bits: self.bits & mask(rest),
            len: rest as u8,
        }
    }

    /// Bits `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> BitString {
        self.prefix(end).suffix(start)
    }

    pub fn starts_with(&self, prefix: &BitString) -> bool {
        prefix.len() <= self.len() && self.prefix(prefix.len()) == *prefix
    }

    /// `self ‖ other`.
    pub fn concat(&self, other: &BitString) -> Result<BitString> {
        let len = self.len() + other.len();
        if len > MAX_BITS {
            return Err(Error::too_large("concatenated bit string length", MAX_BITS));
        }
        let hi = if other.len() >= 128 {
            0
        } else {
            self.bits << other.len()
        };
        Ok(BitString {
            bits: hi | other.bits,
            len: len as u8,
        })
    }

    /// Concatenates a sequence of strings.
    pub fn concat_all<'a>(parts: impl IntoIterator<Item = &'a BitString>) -> Result<BitString> {
        parts
            .into_iter()
            .try_fold(BitString::EMPTY, |acc, p| acc.concat(p))
    }

    /// Zero-pads on the right to `width` bits.
    pub fn pad_to(&self, width: usize) -> Result<BitString> {
        if width < self.len() {
            return Err(Error::structural(format!(
                "cannot pad {}-bit string to {width} bits",
                self.len
            )));
        }
        self.concat(&BitString::zeros(width - self.len()))
    }

    /// All strings of length `len` in lexicographic order.
    pub fn all(len: usize) -> impl Iterator<Item = BitString> {
        assert!(len < 64, "refusing to enumerate 2^{len} strings");
        (0..1usize << len).map(move |v| BitString::from_index(v, len))
    }
}

impl Ord for BitString {
    /// Lexicographic order; a proper prefix sorts first.
    fn cmp(&self, other: &Self) -> Ordering {
        let common = self.len().min(other.len());
        self.prefix(common)
            .bits
            .cmp(&other.prefix(common).bits)
            .then(self.len.cmp(&other.len))
    }
}

impl PartialOrd for BitString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString(\"{self}\")")
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        BitString::from_bits(&bits)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn concat_lengths_add() {
        let a = bs("101");
        let b = bs("01");
        let c = a.concat(&b).unwrap();
        assert_eq!(c.len(), 5);
        assert_eq!(c.to_string(), "10101");
        assert_eq!(c.prefix(3), a);
        assert_eq!(c.suffix(3), b);
        assert_eq!(c.slice(1, 4), bs("010"));
    }

    #[test]
    fn empty_string_round_trips() {
        let e = bs("");
        assert!(e.is_empty());
        assert_eq!(e, BitString::EMPTY);
        assert_eq!(e.concat(&bs("1")).unwrap(), bs("1"));
    }

    #[test]
    fn ordering_is_lexicographic() {
        let mut v = vec![bs("1"), bs("01"), bs("0"), bs("00"), bs("10"), bs("")];
        v.sort();
        let s: Vec<_> = v.iter().map(|b| b.to_string()).collect();
        assert_eq!(s, ["", "0", "00", "01", "1", "10"]);
    }

    #[test]
    fn overflow_is_reported() {
        let a = BitString::zeros(100);
        assert!(matches!(
            a.concat(&a),
            Err(Error::InstanceTooLarge { .. })
        ));
        assert!("01x".parse::<BitString>().is_err());
        assert!(BitString::from_value(4, 2).is_err());
    }

    #[test]
    fn full_width_strings_work() {
        let a = BitString::from_value(u128::MAX, 128).unwrap();
        assert_eq!(a.prefix(1), bs("1"));
        assert_eq!(a.suffix(1).len(), 127);
        assert_eq!(BitString::EMPTY.concat(&a).unwrap(), a);
    }
}
