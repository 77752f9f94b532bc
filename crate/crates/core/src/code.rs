//! Packed binary codes.
//!
//! A code of length `r` is a sequence of signs in {-1, +1}. Bit `k` lives in
//! word `k / 64` at position `k % 64`; a set bit means +1, a clear bit -1.
//! Tail bits of the last word are always zero so that word-wise XOR+popcount
//! gives the Hamming distance directly.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct HashCode {
    len: usize,
    words: Vec<u64>,
}

#[inline]
fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

impl HashCode {
    /// A code of `len` bits, all -1.
    pub fn negative(len: usize) -> Self {
        HashCode {
            len,
            words: vec![0; words_for(len)],
        }
    }

    /// A code of `len` bits, all +1.
    pub fn positive(len: usize) -> Self {
        let mut code = Self::negative(len);
        for w in &mut code.words {
            *w = !0;
        }
        code.clear_tail();
        code
    }

    /// Build a code from explicit signs. Any value other than -1 or +1 is rejected.
    pub fn from_signs(signs: &[i8]) -> Result<Self> {
        let mut code = Self::negative(signs.len());
        for (k, &s) in signs.iter().enumerate() {
            match s {
                1 => code.set(k, true),
                -1 => {}
                other => return Err(Error::invalid(format!("sign {other} at bit {k} is not ±1"))),
            }
        }
        Ok(code)
    }

    /// Code whose bit `k` is +1 iff `values[k] >= 0`.
    pub fn from_signs_of(values: &[f64]) -> Self {
        let mut code = Self::negative(values.len());
        for (chunk, word) in values.chunks(64).zip(code.words.iter_mut()) {
            let mut w = 0u64;
            for (b, &v) in chunk.iter().enumerate() {
                w |= ((v >= 0.0) as u64) << b;
            }
            *word = w;
        }
        code
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn bit(&self, k: usize) -> bool {
        debug_assert!(k < self.len);
        (self.words[k / 64] >> (k % 64)) & 1 == 1
    }

    /// Sign of bit `k` as ±1.0.
    #[inline]
    pub fn sign(&self, k: usize) -> f64 {
        if self.bit(k) {
            1.0
        } else {
            -1.0
        }
    }

    #[inline]
    pub fn set(&mut self, k: usize, positive: bool) {
        assert!(k < self.len, "bit {k} out of range for code of length {}", self.len);
        let mask = 1u64 << (k % 64);
        if positive {
            self.words[k / 64] |= mask;
        } else {
            self.words[k / 64] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, k: usize) {
        assert!(k < self.len, "bit {k} out of range for code of length {}", self.len);
        self.words[k / 64] ^= 1u64 << (k % 64);
    }

    pub fn to_signs(&self) -> Vec<i8> {
        (0..self.len).map(|k| if self.bit(k) { 1 } else { -1 }).collect()
    }

    /// Elementwise negation.
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        for w in &mut out.words {
            *w = !*w;
        }
        out.clear_tail();
        out
    }

    /// Number of differing positions. Errors if the lengths differ.
    pub fn hamming(&self, other: &HashCode) -> Result<u32> {
        if self.len != other.len {
            return Err(Error::DimensionMismatch {
                expected: self.len,
                found: other.len,
            });
        }
        Ok(self.hamming_unchecked(other))
    }

    #[inline]
    pub fn hamming_unchecked(&self, other: &HashCode) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    /// Bit indices where the two codes agree (`same == true`) or disagree.
    pub fn positions(&self, other: &HashCode, same: bool) -> Vec<usize> {
        let mut out = Vec::new();
        for (wi, (a, b)) in self.words.iter().zip(&other.words).enumerate() {
            let mut diff = a ^ b;
            if same {
                diff = !diff;
            }
            if wi == self.words.len() - 1 {
                diff &= tail_mask(self.len);
            }
            while diff != 0 {
                let b = diff.trailing_zeros() as usize;
                out.push(wi * 64 + b);
                diff &= diff - 1;
            }
        }
        out
    }

    /// Number of bytes used by the byte-packed form.
    pub fn byte_len(len: usize) -> usize {
        len.div_ceil(8)
    }

    /// Byte-packed form: bit `k` at byte `k / 8`, position `k % 8` (LSB first).
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = Self::byte_len(self.len);
        let mut out = Vec::with_capacity(n);
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.truncate(n);
        out
    }

    /// Inverse of [`to_bytes`](Self::to_bytes). Non-zero padding bits are a format error.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Self> {
        if bytes.len() != Self::byte_len(len) {
            return Err(Error::format(format!(
                "code of {len} bits needs {} bytes, got {}",
                Self::byte_len(len),
                bytes.len()
            )));
        }
        let mut code = Self::negative(len);
        for (wi, chunk) in bytes.chunks(8).enumerate() {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            code.words[wi] = u64::from_le_bytes(buf);
        }
        if let Some(last) = code.words.last() {
            if last & !tail_mask(len) != 0 {
                return Err(Error::format("non-zero padding bits in packed code"));
            }
        }
        Ok(code)
    }

    fn clear_tail(&mut self) {
        if let Some(last) = self.words.last_mut() {
            *last &= tail_mask(self.len);
        }
    }
}

#[inline]
fn tail_mask(len: usize) -> u64 {
    match len % 64 {
        0 => !0,
        rem => (1u64 << rem) - 1,
    }
}

impl fmt::Debug for HashCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HashCode(")?;
        for k in 0..self.len {
            f.write_str(if self.bit(k) { "+" } else { "-" })?;
        }
        write!(f, ")")
    }
}

/// Codes of both points of a pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodePair {
    pub i: HashCode,
    pub j: HashCode,
}

impl CodePair {
    pub fn new(i: HashCode, j: HashCode) -> Result<Self> {
        if i.len() != j.len() {
            return Err(Error::DimensionMismatch {
                expected: i.len(),
                found: j.len(),
            });
        }
        Ok(CodePair { i, j })
    }

    pub fn len(&self) -> usize {
        self.i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i.is_empty()
    }

    /// Hamming distance between the two codes.
    pub fn distance(&self) -> u32 {
        self.i.hamming_unchecked(&self.j)
    }

    pub fn negated(&self) -> Self {
        CodePair {
            i: self.i.negated(),
            j: self.j.negated(),
        }
    }
}
