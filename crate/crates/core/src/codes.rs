//! Packed binary codes.
//!
//! Item `j` occupies `ceil(r / 64)` consecutive `u64` words. Bit `i` of the
//! code is bit `i % 64` (least significant first) of word `i / 64`; unused
//! high bits of the last word are zero.
//!
//! Code files:
//!
//! ```text
//! magic   "IMHCODE\0"
//! version u32 = 1
//! r       u32
//! n       u64
//! ids     n x u64
//! words   n * ceil(r/64) x u64
//! crc32   u32
//! ```

use std::path::Path;

use crate::binio::{Reader, Writer};
use crate::{Error, Matrix, Result};

const MAGIC: &[u8; 8] = b"IMHCODE\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSet {
    r: usize,
    words_per_code: usize,
    words: Vec<u64>,
    ids: Vec<u64>,
}

pub fn words_for(r: usize) -> usize {
    r.div_ceil(64)
}

impl CodeSet {
    pub fn empty(r: usize) -> Result<Self> {
        Self::from_words(r, Vec::new(), Vec::new())
    }

    pub fn from_words(r: usize, ids: Vec<u64>, words: Vec<u64>) -> Result<Self> {
        if r == 0 {
            return Err(Error::invalid("code length must be at least 1"));
        }
        let wpc = words_for(r);
        if words.len() != ids.len() * wpc {
            return Err(Error::DimensionMismatch {
                expected: ids.len() * wpc,
                found: words.len(),
            });
        }
        if r % 64 != 0 {
            let mask = !0u64 << (r % 64);
            if words.chunks(wpc).any(|c| c[wpc - 1] & mask != 0) {
                return Err(Error::invalid("code words have bits set beyond r"));
            }
        }
        Ok(Self {
            r,
            words_per_code: wpc,
            words,
            ids,
        })
    }

    /// Packs boolean rows, each of length `r`.
    pub fn from_bits(r: usize, ids: Vec<u64>, bits: &[Vec<bool>]) -> Result<Self> {
        if bits.len() != ids.len() {
            return Err(Error::DimensionMismatch {
                expected: ids.len(),
                found: bits.len(),
            });
        }
        let wpc = words_for(r);
        let mut words = vec![0u64; ids.len() * wpc];
        for (j, row) in bits.iter().enumerate() {
            if row.len() != r {
                return Err(Error::DimensionMismatch {
                    expected: r,
                    found: row.len(),
                });
            }
            for (i, &b) in row.iter().enumerate() {
                if b {
                    words[j * wpc + i / 64] |= 1 << (i % 64);
                }
            }
        }
        Self::from_words(r, ids, words)
    }

    /// Thresholds real values at zero: bit `i` of item `j` is set iff
    /// `values[(j, i)] >= 0`.
    pub fn from_signs(values: &Matrix, ids: Vec<u64>) -> Result<Self> {
        let (n, r) = values.shape();
        if ids.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: ids.len(),
            });
        }
        let wpc = words_for(r);
        let mut words = vec![0u64; n * wpc];
        for (j, row) in values.row_iter().enumerate() {
            for (i, &v) in row.iter().enumerate() {
                if v >= 0.0 {
                    words[j * wpc + i / 64] |= 1 << (i % 64);
                }
            }
        }
        Self::from_words(r, ids, words)
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn words_per_code(&self) -> usize {
        self.words_per_code
    }

    pub fn code(&self, j: usize) -> &[u64] {
        &self.words[j * self.words_per_code..(j + 1) * self.words_per_code]
    }

    pub fn bit(&self, j: usize, i: usize) -> bool {
        assert!(i < self.r, "bit {i} out of range for r = {}", self.r);
        self.code(j)[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn unpack(&self, j: usize) -> Vec<bool> {
        (0..self.r).map(|i| self.bit(j, i)).collect()
    }

    /// Hamming distance from item `j` to a packed code of the same length.
    #[inline]
    pub fn distance_to(&self, j: usize, code: &[u64]) -> u32 {
        hamming(self.code(j), code)
    }

    /// Items at the given positions.
    pub fn select(&self, positions: &[usize]) -> CodeSet {
        let mut words = Vec::with_capacity(positions.len() * self.words_per_code);
        for &p in positions {
            words.extend_from_slice(self.code(p));
        }
        CodeSet {
            r: self.r,
            words_per_code: self.words_per_code,
            words,
            ids: positions.iter().map(|&p| self.ids[p]).collect(),
        }
    }

    /// Fraction of items with bit `i` set, per bit.
    pub fn bit_balance(&self) -> Vec<f64> {
        let n = self.len().max(1) as f64;
        (0..self.r)
            .map(|i| (0..self.len()).filter(|&j| self.bit(j, i)).count() as f64 / n)
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(MAGIC, VERSION);
        w.u32(self.r as u32);
        w.u64(self.len() as u64);
        w.u64s(&self.ids);
        w.u64s(&self.words);
        w.finish()
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let mut rd = Reader::open(path, bytes, MAGIC, VERSION)?;
        let r = rd.u32()? as usize;
        let n = rd.usize()?;
        let ids = rd.u64s(n)?;
        let count = n
            .checked_mul(words_for(r))
            .ok_or_else(|| rd.error("code count overflows"))?;
        let words = rd.u64s(count)?;
        rd.finish()?;
        Self::from_words(r, ids, words)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(path, &std::fs::read(path)?)
    }
}

#[inline]
pub fn hamming(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}
