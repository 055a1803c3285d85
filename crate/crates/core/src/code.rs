//! Self-delimiting integer codes.
//!
//! The prefix part writes `n ≥ 1` in binary and follows each bit with a flag:
//! `0` after every bit but the last and `1` after the last. The resulting
//! code words are prefix-free. The pair code appends the plain binary
//! notation of `m ≥ 1`.

use crate::error::{Error, Result};
use crate::strings::BinaryString;

fn binary_bits(n: u128) -> Vec<bool> {
    let width = 128 - n.leading_zeros() as usize;
    (0..width).rev().map(|i| (n >> i) & 1 == 1).collect()
}

/// Prefix-free code word of `n ≥ 1`.
pub fn prefix_code(n: u128) -> Result<BinaryString> {
    if n == 0 {
        return Err(Error::Domain("binary notation of 0 is not coded".into()));
    }
    let bits = binary_bits(n);
    let last = bits.len() - 1;
    let mut out = Vec::with_capacity(2 * bits.len());
    for (k, b) in bits.into_iter().enumerate() {
        out.push(b);
        out.push(k == last);
    }
    Ok(BinaryString::from_bits(out))
}

/// Reads one prefix code word starting at `pos`; returns the value and the
/// position just after it.
pub fn read_prefix_code(s: &BinaryString, pos: usize) -> Result<(u128, usize)> {
    let bits = s.bits();
    let mut value: u128 = 0;
    let mut p = pos;
    loop {
        let (Some(&b), Some(&flag)) = (bits.get(p), bits.get(p + 1)) else {
            return Err(Error::Format(format!("truncated code word at bit {pos}")));
        };
        if p == pos && !b {
            return Err(Error::Format(format!("code word at bit {pos} has a leading zero")));
        }
        value = value
            .checked_mul(2)
            .ok_or_else(|| Error::Format("code word overflows".into()))?
            | u128::from(b);
        p += 2;
        if flag {
            return Ok((value, p));
        }
    }
}

/// `τ₀τ₁` where `τ₀` is the prefix code of `n` and `τ₁` the binary notation of `m`.
pub fn selfdelim_encode(n: u64, m: u64) -> Result<BinaryString> {
    if m == 0 {
        return Err(Error::Domain("binary notation of 0 is not coded".into()));
    }
    let head = prefix_code(u128::from(n))?;
    Ok(head.concat(&BinaryString::from_bits(binary_bits(u128::from(m)))))
}

pub fn selfdelim_decode(s: &BinaryString) -> Result<(u64, u64)> {
    let (n, pos) = read_prefix_code(s, 0)?;
    let tail = &s.bits()[pos..];
    if tail.first() != Some(&true) {
        return Err(Error::Format(format!("{s} has no binary tail starting with 1")));
    }
    if tail.len() > 64 {
        return Err(Error::Format("tail overflows".into()));
    }
    let m = tail.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b));
    let n = u64::try_from(n).map_err(|_| Error::Format("head overflows".into()))?;
    Ok((n, m))
}

/// `⌈log₂(n+1)⌉`, the length of the binary notation of `n ≥ 1`.
pub fn binary_length(n: u64) -> usize {
    64 - n.leading_zeros() as usize
}
