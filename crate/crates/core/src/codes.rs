//! Binary code matrices and the `HRC1` code file.
//!
//! ```text
//! "HRC1" | u32 n | u32 l | n rows of l/8 bytes
//! ```
//!
//! Bit 1 encodes +1, bit 0 encodes -1; bits are most-significant-first
//! within each byte.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{ByteReader, ByteWriter};

const CODE_MAGIC: &[u8; 4] = b"HRC1";

/// `n x l` matrix of ±1 entries, one row per proposition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeMatrix {
    rows: usize,
    bits: usize,
    signs: Vec<i8>,
}

impl CodeMatrix {
    pub fn new(rows: usize, bits: usize, signs: Vec<i8>) -> Result<Self> {
        if bits == 0 {
            return Err(Error::Shape("code length must be positive".into()));
        }
        if signs.len() != rows * bits {
            return Err(Error::Shape(format!(
                "{rows}x{bits} code matrix needs {} entries, got {}",
                rows * bits,
                signs.len()
            )));
        }
        if let Some(pos) = signs.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::Shape(format!(
                "code entry at row {}, column {} is {}, not ±1",
                pos / bits,
                pos % bits,
                signs[pos]
            )));
        }
        Ok(CodeMatrix { rows, bits, signs })
    }

    pub fn from_rows(rows: &[Vec<i8>]) -> Result<Self> {
        let bits = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != bits) {
            return Err(Error::Shape("ragged code rows".into()));
        }
        Self::new(rows.len(), bits, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.signs[i * self.bits..(i + 1) * self.bits]
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn get(&self, i: usize, k: usize) -> i8 {
        self.signs[i * self.bits + k]
    }

    /// Number of entries that differ from `other`.
    pub fn flips(&self, other: &CodeMatrix) -> usize {
        self.signs
            .iter()
            .zip(&other.signs)
            .filter(|(a, b)| a != b)
            .count()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if !self.bits.is_multiple_of(8) {
            return Err(Error::Config(format!(
                "code length {} is not a multiple of 8",
                self.bits
            )));
        }
        let mut w = ByteWriter::with_capacity(12 + self.rows * self.bits / 8);
        w.magic(CODE_MAGIC);
        w.u32(self.rows as u32);
        w.u32(self.bits as u32);
        for i in 0..self.rows {
            w.bytes(&pack_bytes(self.row(i)));
        }
        Ok(w.into_inner())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "code file");
        r.magic(CODE_MAGIC)?;
        let rows = r.u32()? as usize;
        let bits = r.u32()? as usize;
        if bits == 0 || !bits.is_multiple_of(8) {
            return Err(Error::Config(format!(
                "code length {bits} is not a positive multiple of 8"
            )));
        }
        r.require(rows * bits / 8)?;
        let mut signs = Vec::with_capacity(rows * bits);
        for _ in 0..rows {
            signs.extend(unpack_bytes(r.take(bits / 8)?, bits));
        }
        r.finish()?;
        Self::new(rows, bits, signs)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_file(path, &self.to_bytes()?)
    }
}

pub fn load_codes(path: impl AsRef<Path>) -> Result<CodeMatrix> {
    CodeMatrix::from_bytes(&crate::io::read_file(path)?)
}

/// Packs ±1 signs into bytes, MSB first. Trailing bits of a partial byte are 0.
pub fn pack_bytes(signs: &[i8]) -> Vec<u8> {
    signs
        .chunks(8)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &s)| acc | (u8::from(s > 0) << (7 - i)))
        })
        .collect()
}

pub fn unpack_bytes(bytes: &[u8], bits: usize) -> Vec<i8> {
    (0..bits)
        .map(|k| {
            if bytes[k / 8] >> (7 - k % 8) & 1 == 1 {
                1
            } else {
                -1
            }
        })
        .collect()
}

/// Packs ±1 signs into 64-bit words. Bit `k` of the code is bit `63 - k % 64`
/// of word `k / 64`, i.e. the words are the code file bytes read big-endian.
pub fn pack_words(signs: &[i8]) -> Vec<u64> {
    signs
        .chunks(64)
        .map(|chunk| {
            chunk
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, &s)| acc | (u64::from(s > 0) << (63 - i)))
        })
        .collect()
}

pub fn unpack_words(words: &[u64], bits: usize) -> Vec<i8> {
    (0..bits)
        .map(|k| {
            if words[k / 64] >> (63 - k % 64) & 1 == 1 {
                1
            } else {
                -1
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_non_sign_entries() {
        assert!(CodeMatrix::new(1, 2, vec![1, 0]).is_err());
        assert!(CodeMatrix::new(1, 2, vec![1]).is_err());
    }

    #[test]
    fn msb_first_packing() {
        let signs = [1, -1, -1, -1, -1, -1, -1, 1];
        assert_eq!(pack_bytes(&signs), vec![0b1000_0001]);
        let mut word_signs = vec![-1i8; 64];
        word_signs[0] = 1;
        word_signs[63] = 1;
        assert_eq!(pack_words(&word_signs), vec![(1u64 << 63) | 1]);
    }

    #[test]
    fn words_are_big_endian_bytes() {
        let signs: Vec<i8> = (0..128).map(|i| if (i * 7) % 3 == 0 { 1 } else { -1 }).collect();
        let bytes = pack_bytes(&signs);
        let words: Vec<u64> = bytes
            .chunks(8)
            .map(|c| u64::from_be_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(words, pack_words(&signs));
    }

    #[test]
    fn code_file_layout() {
        let m = CodeMatrix::new(2, 8, vec![1, 1, 1, 1, -1, -1, -1, -1, -1, 1, -1, 1, -1, 1, -1, 1])
            .unwrap();
        let bytes = m.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"HRC1");
        assert_eq!(&bytes[4..12], &[2, 0, 0, 0, 8, 0, 0, 0]);
        assert_eq!(&bytes[12..], &[0xF0, 0x55]);
    }

    proptest! {
        #[test]
        fn code_file_round_trips(rows in 1usize..6, bytes_per_row in 1usize..5, seed in any::<u64>()) {
            let bits = bytes_per_row * 8;
            let signs: Vec<i8> = (0..rows * bits)
                .map(|i| if (seed.rotate_left(i as u32 % 64) ^ i as u64) & 1 == 1 { 1 } else { -1 })
                .collect();
            let m = CodeMatrix::new(rows, bits, signs).unwrap();
            let bytes = m.to_bytes().unwrap();
            prop_assert_eq!(CodeMatrix::from_bytes(&bytes).unwrap(), m.clone());
            for i in 0..rows {
                prop_assert_eq!(unpack_words(&pack_words(m.row(i)), bits), m.row(i).to_vec());
            }
        }
    }
}
