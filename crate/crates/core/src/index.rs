//! Packed Hamming index with radius expansion and asymmetric re-ranking.
//!
//! Codes are stored as `l / 64` words per row. Candidate generation is one
//! linear scan that buckets every row by its distance to the query; the
//! buckets are then emitted in increasing radius until at least `alpha`
//! rows are collected. All rows tied at the boundary radius are kept.
//!
//! Index file layout (little-endian header):
//!
//! ```text
//! "HRI1" | u32 n | u32 l | n rows of l/8 bytes (code-file bit order) | n * (u16 len, utf-8 id)
//! ```

use std::cmp::Ordering;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::codes::{pack_words, unpack_words, CodeMatrix};
use crate::embedding::binarize;
use crate::error::{Error, Result};
use crate::io::{ByteReader, ByteWriter};

const INDEX_MAGIC: &[u8; 4] = b"HRI1";

/// Number of differing bits between two packed codes.
///
/// Equals `(l - <a, b>) / 2` for the ±1 forms of `a` and `b`.
pub fn hamming_distance(a: &[u64], b: &[u64]) -> Result<u32> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "codes of {} and {} words",
            a.len(),
            b.len()
        )));
    }
    Ok(hamming_unchecked(a, b))
}

#[inline]
fn hamming_unchecked(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// Packed query code, optionally with the real-valued projection it was
/// binarized from.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryCode {
    words: Vec<u64>,
    bits: usize,
    real: Option<Vec<f32>>,
}

impl QueryCode {
    /// Binarizes `real` and keeps it for re-ranking.
    pub fn from_real<T: Copy + Into<f64>>(real: &[T]) -> Self {
        let signs = binarize(real);
        QueryCode {
            words: pack_words(&signs),
            bits: signs.len(),
            real: Some(real.iter().map(|&x| x.into() as f32).collect()),
        }
    }

    /// Code without a real-valued part; re-ranking falls back to bits.
    pub fn from_signs(signs: &[i8]) -> Self {
        QueryCode {
            words: pack_words(signs),
            bits: signs.len(),
            real: None,
        }
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn real(&self) -> Option<&[f32]> {
        self.real.as_deref()
    }

    /// Same code with the real-valued part dropped.
    pub fn bits_only(&self) -> Self {
        QueryCode {
            real: None,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub row: u32,
    pub distance: u32,
    /// Asymmetric score `<v_q, h_p>`; before re-ranking, the bit-level inner
    /// product `l - 2 * distance`.
    pub score: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
    /// Smallest radius whose cumulative count reached the target.
    pub radius: u32,
    /// Rows whose distance was computed.
    pub examined: usize,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Timing and work counters for one query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryStats {
    pub nanos: u64,
    pub examined: usize,
    pub candidates: usize,
    pub radius: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub ranked: Vec<Candidate>,
    pub stats: QueryStats,
}

/// Immutable packed-code index over propositions.
#[derive(Debug, Clone, PartialEq)]
pub struct HammingIndex {
    bits: usize,
    words_per_row: usize,
    words: Vec<u64>,
    prop_ids: Vec<String>,
}

impl HammingIndex {
    pub fn build(codes: &CodeMatrix, prop_ids: Vec<String>) -> Result<Self> {
        let bits = codes.bits();
        if !bits.is_multiple_of(64) {
            return Err(Error::Config(format!(
                "code length {bits} is not a multiple of 64"
            )));
        }
        if prop_ids.len() != codes.rows() {
            return Err(Error::Shape(format!(
                "{} prop ids for {} code rows",
                prop_ids.len(),
                codes.rows()
            )));
        }
        let words = (0..codes.rows())
            .flat_map(|i| pack_words(codes.row(i)))
            .collect();
        Ok(Self::from_words(bits, words, prop_ids))
    }

    /// Builds directly from packed words, `bits / 64` per row.
    pub fn from_packed(bits: usize, words: Vec<u64>, prop_ids: Vec<String>) -> Result<Self> {
        if bits == 0 || !bits.is_multiple_of(64) {
            return Err(Error::Config(format!(
                "code length {bits} is not a positive multiple of 64"
            )));
        }
        if words.len() != prop_ids.len() * bits / 64 {
            return Err(Error::Shape(format!(
                "{} words for {} rows of {bits} bits",
                words.len(),
                prop_ids.len()
            )));
        }
        Ok(Self::from_words(bits, words, prop_ids))
    }

    fn from_words(bits: usize, words: Vec<u64>, prop_ids: Vec<String>) -> Self {
        HammingIndex {
            bits,
            words_per_row: bits / 64,
            words,
            prop_ids,
        }
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.prop_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prop_ids.is_empty()
    }

    pub fn prop_id(&self, row: u32) -> &str {
        &self.prop_ids[row as usize]
    }

    pub fn prop_ids(&self) -> &[String] {
        &self.prop_ids
    }

    pub fn row_words(&self, row: usize) -> &[u64] {
        &self.words[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    pub fn to_codes(&self) -> CodeMatrix {
        let signs = (0..self.len())
            .flat_map(|i| unpack_words(self.row_words(i), self.bits))
            .collect();
        CodeMatrix::new(self.len(), self.bits, signs).expect("index rows are valid codes")
    }

    /// Packed codes plus the id table, as laid out on disk (without header).
    pub fn index_bytes(&self) -> usize {
        self.len() * self.bits / 8 + self.prop_ids.iter().map(|id| 2 + id.len()).sum::<usize>()
    }

    fn check_query(&self, q: &QueryCode) -> Result<()> {
        if q.bits != self.bits {
            return Err(Error::Shape(format!(
                "query has {} bits, index has {}",
                q.bits, self.bits
            )));
        }
        Ok(())
    }

    fn check_count(&self, what: &'static str, value: usize) -> Result<()> {
        if value == 0 || value > self.len() {
            return Err(Error::OutOfRange {
                what,
                value,
                min: 1,
                max: self.len(),
            });
        }
        Ok(())
    }

    /// All rows within the smallest radius `r*` that yields at least `alpha`
    /// rows, ordered by distance then row.
    pub fn radius_expand(&self, q: &QueryCode, alpha: usize) -> Result<CandidateSet> {
        self.check_query(q)?;
        self.check_count("alpha", alpha)?;
        let qw = q.words();
        let mut dist = Vec::with_capacity(self.len());
        let mut counts = vec![0usize; self.bits + 1];
        for row in self.words.chunks_exact(self.words_per_row) {
            let d = hamming_unchecked(qw, row);
            counts[d as usize] += 1;
            dist.push(d);
        }

        let mut radius = 0;
        let mut total = 0;
        for (r, &c) in counts.iter().enumerate() {
            total += c;
            if total >= alpha {
                radius = r;
                break;
            }
        }

        // Counting sort of the rows inside the radius; stable in row order.
        let mut offsets = vec![0usize; radius + 2];
        for r in 0..=radius {
            offsets[r + 1] = offsets[r] + counts[r];
        }
        let l = self.bits as f32;
        let mut candidates = vec![
            Candidate {
                row: 0,
                distance: 0,
                score: 0.0
            };
            total
        ];
        for (row, &d) in dist.iter().enumerate() {
            let d = d as usize;
            if d <= radius {
                candidates[offsets[d]] = Candidate {
                    row: row as u32,
                    distance: d as u32,
                    score: l - 2.0 * d as f32,
                };
                offsets[d] += 1;
            }
        }
        Ok(CandidateSet {
            candidates,
            radius: radius as u32,
            examined: self.len(),
        })
    }

    /// Exact `k` nearest rows by Hamming distance, ties by row order.
    pub fn full_scan_topk(&self, q: &QueryCode, k: usize) -> Result<CandidateSet> {
        self.check_query(q)?;
        self.check_count("k", k)?;
        let l = self.bits as f32;
        let mut all: Vec<Candidate> = (0..self.len())
            .map(|row| {
                let d = hamming_unchecked(q.words(), self.row_words(row));
                Candidate {
                    row: row as u32,
                    distance: d,
                    score: l - 2.0 * d as f32,
                }
            })
            .collect();
        all.sort_by_key(|c| (c.distance, c.row));
        all.truncate(k);
        let radius = all.last().map_or(0, |c| c.distance);
        Ok(CandidateSet {
            candidates: all,
            radius,
            examined: self.len(),
        })
    }

    /// `<v, h_row>` for the ±1 form of a stored code.
    pub fn asymmetric_score(&self, real: &[f32], row: usize) -> f32 {
        let total: f64 = real.iter().map(|&x| f64::from(x)).sum();
        let mut positive = 0.0f64;
        for (w, &word) in self.row_words(row).iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let tz = bits.trailing_zeros() as usize;
                positive += f64::from(real[w * 64 + 63 - tz]);
                bits &= bits - 1;
            }
        }
        (2.0 * positive - total) as f32
    }

    /// Top `j` candidates by descending `<v_q, h_p>`, ties by ascending
    /// distance then row.
    pub fn rerank_top(&self, candidates: &CandidateSet, q: &QueryCode, j: usize) -> Result<Vec<Candidate>> {
        self.check_query(q)?;
        let real = q.real().ok_or(Error::MissingRealQuery)?;
        if j > candidates.len() {
            return Err(Error::OutOfRange {
                what: "j",
                value: j,
                min: 0,
                max: candidates.len(),
            });
        }
        let mut scored: Vec<Candidate> = candidates
            .candidates
            .iter()
            .map(|c| Candidate {
                score: self.asymmetric_score(real, c.row as usize),
                ..*c
            })
            .collect();
        let cmp = |a: &Candidate, b: &Candidate| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(Ordering::Equal)
                .then(a.distance.cmp(&b.distance))
                .then(a.row.cmp(&b.row))
        };
        if j < scored.len() && j > 0 {
            scored.select_nth_unstable_by(j - 1, cmp);
        }
        scored.truncate(j);
        scored.sort_unstable_by(cmp);
        Ok(scored)
    }

    /// Radius expansion to `alpha` candidates, then the top `j` by
    /// asymmetric score. Without a real-valued query part the candidates
    /// keep their Hamming order. Both counts are clamped to the index size
    /// and `j` to the candidate count.
    pub fn search(&self, q: &QueryCode, alpha: usize, j: usize) -> Result<SearchResult> {
        let started = Instant::now();
        let cands = self.radius_expand(q, alpha.clamp(1, self.len()))?;
        let j = j.min(cands.len());
        let ranked = if q.real().is_some() {
            self.rerank_top(&cands, q, j)?
        } else {
            cands.candidates[..j].to_vec()
        };
        let nanos = started.elapsed().as_nanos() as u64;
        Ok(SearchResult {
            stats: QueryStats {
                nanos,
                examined: cands.examined,
                candidates: cands.len(),
                radius: cands.radius,
            },
            ranked,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = ByteWriter::with_capacity(12 + self.index_bytes());
        w.magic(INDEX_MAGIC);
        w.u32(self.len() as u32);
        w.u32(self.bits as u32);
        for word in &self.words {
            w.bytes(&word.to_be_bytes());
        }
        for id in &self.prop_ids {
            w.short_str(id)?;
        }
        Ok(w.into_inner())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "index file");
        r.magic(INDEX_MAGIC)?;
        let n = r.u32()? as usize;
        let bits = r.u32()? as usize;
        if bits == 0 || !bits.is_multiple_of(64) {
            return Err(Error::Config(format!(
                "code length {bits} is not a positive multiple of 64"
            )));
        }
        r.require(n * bits / 8)?;
        let words = (0..n * bits / 64)
            .map(|_| r.take(8).map(|b| u64::from_be_bytes(b.try_into().unwrap())))
            .collect::<Result<Vec<_>>>()?;
        let ids = (0..n).map(|_| r.short_str()).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        Self::from_packed(bits, words, ids)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_file(path, &self.to_bytes()?)
    }
}

pub fn load_index(path: impl AsRef<Path>) -> Result<HammingIndex> {
    HammingIndex::from_bytes(&crate::io::read_file(path)?)
}
