use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;

use ndarray::Array2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// One labeled training instance: a query with positive and negative
/// propositions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub query_id: String,
    pub positive: Vec<String>,
    #[serde(default)]
    pub negative: Vec<String>,
}

pub fn load_triples(path: impl AsRef<Path>) -> Result<Vec<Triple>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Triple = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(t);
    }
    Ok(out)
}

/// Where the relaxed code of a supervision row comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowSource {
    /// A labeled query, looked up by id in the embedding matrix.
    Query(String),
    /// A sampled proposition acting as its own query.
    Proposition(usize),
}

/// Rows of the supervision matrix and their metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisionSet {
    /// Anchor proposition of each row: the sampled index in self-match mode,
    /// the first positive in labeled mode. The quantization term ties each
    /// row's relaxed code to its anchor's code.
    pub omega: Vec<usize>,
    /// `m x n`, entries exactly ±1.
    pub s: Array2<f64>,
    pub sources: Vec<RowSource>,
    pub positives: Vec<Vec<usize>>,
    pub negatives: Vec<Vec<usize>>,
}

impl SupervisionSet {
    pub fn rows(&self) -> usize {
        self.omega.len()
    }

    /// Labeled mode: one row per triple, `+1` at positives, `-1` elsewhere.
    pub fn labeled(corpus: &Corpus, triples: &[Triple]) -> Result<Self> {
        let n = corpus.len();
        if triples.is_empty() {
            return Err(Error::Config("no training triples".into()));
        }
        let mut s = Array2::from_elem((triples.len(), n), -1.0);
        let mut omega = Vec::with_capacity(triples.len());
        let mut positives = Vec::with_capacity(triples.len());
        let mut negatives = Vec::with_capacity(triples.len());
        for (i, t) in triples.iter().enumerate() {
            if t.positive.is_empty() {
                return Err(Error::Config(format!(
                    "triple for query {:?} has no positive",
                    t.query_id
                )));
            }
            let pos = t
                .positive
                .iter()
                .map(|p| corpus.prop_row(p))
                .collect::<Result<Vec<_>>>()?;
            let neg = t
                .negative
                .iter()
                .map(|p| corpus.prop_row(p))
                .collect::<Result<Vec<_>>>()?;
            for &j in &pos {
                s[[i, j]] = 1.0;
            }
            omega.push(pos[0]);
            positives.push(pos);
            negatives.push(neg);
        }
        Ok(SupervisionSet {
            omega,
            s,
            sources: triples
                .iter()
                .map(|t| RowSource::Query(t.query_id.clone()))
                .collect(),
            positives,
            negatives,
        })
    }

    /// Self-match mode: sample `m` distinct propositions; each is the only
    /// positive of its own row.
    pub fn self_match(n: usize, m: usize, seed: u64) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::OutOfRange {
                what: "m",
                value: m,
                min: 1,
                max: n,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let omega = sample(&mut rng, n, m).into_vec();
        let mut s = Array2::from_elem((m, n), -1.0);
        for (i, &j) in omega.iter().enumerate() {
            s[[i, j]] = 1.0;
        }
        debug_assert_eq!(omega.iter().collect::<HashSet<_>>().len(), m);
        Ok(SupervisionSet {
            positives: omega.iter().map(|&j| vec![j]).collect(),
            negatives: omega
                .iter()
                .map(|&j| (0..n).filter(|&k| k != j).collect())
                .collect(),
            sources: omega.iter().map(|&j| RowSource::Proposition(j)).collect(),
            omega,
            s,
        })
    }
}

/// Labeled mode when `triples` is non-empty, self-match sampling otherwise.
pub fn build_supervision(
    corpus: &Corpus,
    triples: Option<&[Triple]>,
    m: usize,
    seed: u64,
) -> Result<SupervisionSet> {
    match triples {
        Some(t) if !t.is_empty() => SupervisionSet::labeled(corpus, t),
        _ => SupervisionSet::self_match(corpus.len(), m, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Proposition};

    fn corpus(n: usize) -> Corpus {
        Corpus::new(
            vec![Document {
                doc_id: "d".into(),
                title: "t".into(),
                text: "x".into(),
            }],
            (0..n)
                .map(|i| Proposition {
                    prop_id: format!("p{}", i + 1),
                    doc_id: "d".into(),
                    ordinal: i as u32,
                    text: "y".into(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn labeled_row() {
        let c = corpus(3);
        let t = Triple {
            query_id: "q".into(),
            positive: vec!["p2".into()],
            negative: vec!["p1".into(), "p3".into()],
        };
        let sup = build_supervision(&c, Some(&[t]), 0, 0).unwrap();
        assert_eq!(sup.s.row(0).to_vec(), vec![-1.0, 1.0, -1.0]);
        assert_eq!(sup.omega, vec![1]);
        assert_eq!(sup.negatives[0], vec![0, 2]);
    }

    #[test]
    fn self_match_full_sample_is_permutation() {
        let c = corpus(6);
        let sup = build_supervision(&c, None, 6, 42).unwrap();
        let mut sorted = sup.omega.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..6).collect::<Vec<_>>());
        for (i, &j) in sup.omega.iter().enumerate() {
            for k in 0..6 {
                let expect = if k == j { 1.0 } else { -1.0 };
                assert_eq!(sup.s[[i, k]], expect);
            }
        }
    }

    #[test]
    fn same_seed_same_sample() {
        let a = SupervisionSet::self_match(50, 20, 7).unwrap();
        let b = SupervisionSet::self_match(50, 20, 7).unwrap();
        assert_eq!(a, b);
        let c = SupervisionSet::self_match(50, 20, 8).unwrap();
        assert_ne!(a.omega, c.omega);
    }

    #[test]
    fn errors() {
        let c = corpus(3);
        assert!(matches!(
            build_supervision(&c, None, 4, 0),
            Err(Error::OutOfRange { .. })
        ));
        let t = Triple {
            query_id: "q".into(),
            positive: vec!["zz".into()],
            negative: vec![],
        };
        assert!(matches!(
            build_supervision(&c, Some(&[t]), 0, 0),
            Err(Error::UnknownProposition(_))
        ));
    }
}
