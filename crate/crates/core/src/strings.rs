//! Finite binary strings.
//!
//! Strings are ordered length-lexicographically everywhere in this crate,
//! so every set-valued result has a canonical iteration order. The empty
//! string is written `e` in all textual I/O.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Token used for the empty string in text formats.
pub const EMPTY_TOKEN: &str = "e";

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BinaryString {
    bits: Vec<bool>,
}

impl BinaryString {
    pub fn empty() -> Self {
        Self { bits: Vec::new() }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// All strings of the given length, in lexicographic order.
    pub fn all_of_length(len: usize) -> impl Iterator<Item = BinaryString> {
        assert!(len < 64, "refusing to enumerate 2^{len} strings");
        (0u64..(1u64 << len)).map(move |v| BinaryString::from_u64(v, len))
    }

    /// The `len`-bit big-endian binary rendering of `value`.
    pub fn from_u64(value: u64, len: usize) -> Self {
        let bits = (0..len).rev().map(|i| (value >> i) & 1 == 1).collect();
        Self { bits }
    }

    /// Binary notation of `n` without leading zeros (`0` renders as `"0"`).
    pub fn binary_of(n: u64) -> Self {
        if n == 0 {
            return Self::from_bits(vec![false]);
        }
        let width = 64 - n.leading_zeros() as usize;
        Self::from_u64(n, width)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bit(&self, i: usize) -> Option<bool> {
        self.bits.get(i).copied()
    }

    pub fn push(&mut self, b: bool) {
        self.bits.push(b);
    }

    pub fn child(&self, b: bool) -> Self {
        let mut out = self.clone();
        out.bits.push(b);
        out
    }

    pub fn concat(&self, other: &BinaryString) -> Self {
        let mut bits = self.bits.clone();
        bits.extend_from_slice(&other.bits);
        Self { bits }
    }

    /// Initial segment of length `min(n, len)`.
    pub fn prefix(&self, n: usize) -> Self {
        Self {
            bits: self.bits[..n.min(self.bits.len())].to_vec(),
        }
    }

    /// `τ⁻`: drop the last bit; the empty string maps to itself.
    pub fn parent(&self) -> Self {
        self.prefix(self.len().saturating_sub(1))
    }

    /// `self ⊆ other`.
    pub fn is_prefix_of(&self, other: &BinaryString) -> bool {
        self.len() <= other.len() && other.bits[..self.len()] == self.bits[..]
    }

    /// `self ⊂ other`.
    pub fn is_proper_prefix_of(&self, other: &BinaryString) -> bool {
        self.len() < other.len() && self.is_prefix_of(other)
    }

    pub fn is_compatible(&self, other: &BinaryString) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }

    /// Every proper initial segment, shortest first.
    pub fn proper_prefixes(&self) -> impl Iterator<Item = BinaryString> + '_ {
        (0..self.len()).map(move |n| self.prefix(n))
    }

    /// Index of this string in the length-lexicographic enumeration
    /// (`e ↦ 0, 0 ↦ 1, 1 ↦ 2, 00 ↦ 3, …`). `None` if it does not fit in u64.
    pub fn length_lex_index(&self) -> Option<u64> {
        if self.len() >= 64 {
            return None;
        }
        let mut v: u64 = 1;
        for &b in &self.bits {
            v = (v << 1) | u64::from(b);
        }
        Some(v - 1)
    }

    /// Inverse of [`BinaryString::length_lex_index`].
    pub fn from_length_lex_index(index: u64) -> Self {
        let v = index as u128 + 1;
        let width = 127 - v.leading_zeros() as usize;
        let bits = (0..width).rev().map(|i| (v >> i) & 1 == 1).collect();
        Self { bits }
    }

    /// Value of the bits read as a big-endian binary numeral.
    pub fn to_u64(&self) -> Option<u64> {
        if self.len() > 64 {
            return None;
        }
        Some(self.bits.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b)))
    }

    /// The bits as a sequence of 0/1 naturals.
    pub fn to_values(&self) -> Vec<u64> {
        self.bits.iter().map(|&b| u64::from(b)).collect()
    }

    /// Longest binary initial segment of a value sequence.
    pub fn from_values_prefix(values: &[u64]) -> Self {
        let bits = values
            .iter()
            .take_while(|&&v| v <= 1)
            .map(|&v| v == 1)
            .collect();
        Self { bits }
    }
}

impl Ord for BinaryString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.bits.cmp(&other.bits))
    }
}

impl PartialOrd for BinaryString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BinaryString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bits.is_empty() {
            return f.write_str(EMPTY_TOKEN);
        }
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BinaryString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl FromStr for BinaryString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == EMPTY_TOKEN {
            return Ok(Self::empty());
        }
        if s.is_empty() {
            return Err(Error::Format(
                "empty token; write the empty string as `e`".into(),
            ));
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Format(format!(
                    "invalid character {other:?} in binary string {s:?}"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self::from_bits)
    }
}

/// Shorthand used heavily in tests: parse a string token, panicking on bad input.
pub fn bs(s: &str) -> BinaryString {
    s.parse().unwrap_or_else(|e| panic!("bad binary string {s:?}: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_lex_order() {
        let mut v = vec![bs("1"), bs("00"), bs("e"), bs("0"), bs("01")];
        v.sort();
        assert_eq!(v, vec![bs("e"), bs("0"), bs("1"), bs("00"), bs("01")]);
    }

    #[test]
    fn empty_token_round_trip() {
        assert_eq!(BinaryString::empty().to_string(), "e");
        assert_eq!(bs("e"), BinaryString::empty());
        assert!("".parse::<BinaryString>().is_err());
        assert!("012".parse::<BinaryString>().is_err());
    }

    #[test]
    fn prefixes_and_compatibility() {
        assert!(bs("e").is_prefix_of(&bs("010")));
        assert!(bs("01").is_proper_prefix_of(&bs("010")));
        assert!(!bs("010").is_proper_prefix_of(&bs("010")));
        assert!(bs("010").is_compatible(&bs("01")));
        assert!(!bs("011").is_compatible(&bs("010")));
        assert_eq!(bs("e").parent(), bs("e"));
        assert_eq!(bs("01").parent(), bs("0"));
    }

    #[test]
    fn length_lex_index_matches_enumeration() {
        let mut expected = 0u64;
        for len in 0..6 {
            for s in BinaryString::all_of_length(len) {
                assert_eq!(s.length_lex_index(), Some(expected));
                assert_eq!(BinaryString::from_length_lex_index(expected), s);
                expected += 1;
            }
        }
    }

    #[test]
    fn binary_notation() {
        assert_eq!(BinaryString::binary_of(5), bs("101"));
        assert_eq!(BinaryString::binary_of(1), bs("1"));
        assert_eq!(bs("101").to_u64(), Some(5));
    }
}
