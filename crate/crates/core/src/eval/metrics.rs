use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relevance judgments for one query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qrel {
    pub query_id: String,
    pub relevant_docs: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub relevant_props: BTreeSet<String>,
}

/// `query_id -> relevant documents (and optionally propositions)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QrelSet {
    qrels: BTreeMap<String, Qrel>,
}

impl QrelSet {
    pub fn new(qrels: impl IntoIterator<Item = Qrel>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for q in qrels {
            if q.relevant_docs.is_empty() {
                return Err(Error::Config(format!(
                    "query {:?} has no relevant documents",
                    q.query_id
                )));
            }
            if map.insert(q.query_id.clone(), q).is_some() {
                return Err(Error::Config("duplicate query in qrels".into()));
            }
        }
        Ok(QrelSet { qrels: map })
    }

    pub fn get(&self, query_id: &str) -> Option<&Qrel> {
        self.qrels.get(query_id)
    }

    pub fn len(&self) -> usize {
        self.qrels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qrels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Qrel> {
        self.qrels.values()
    }

    pub fn has_prop_judgments(&self) -> bool {
        self.qrels.values().all(|q| !q.relevant_props.is_empty())
    }

    pub fn write_jsonl(&self, mut w: impl std::io::Write) -> Result<()> {
        for q in self.qrels.values() {
            serde_json::to_writer(&mut w, q)?;
            w.write_all(b"\n").map_err(|e| Error::io("<qrels writer>", e))?;
        }
        Ok(())
    }
}

pub fn load_qrels(path: impl AsRef<Path>) -> Result<QrelSet> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut qrels = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        qrels.push(serde_json::from_str(&line).map_err(|e| Error::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    QrelSet::new(qrels)
}

/// 1.0 when any of the first `k` retrieved items is relevant, else 0.0.
pub fn recall_at_k<S: AsRef<str>>(retrieved: &[S], relevant: &BTreeSet<String>, k: usize) -> f64 {
    let hit = retrieved
        .iter()
        .take(k)
        .any(|r| relevant.contains(r.as_ref()));
    if hit {
        1.0
    } else {
        0.0
    }
}

/// Precision at each relevant hit, summed and divided by the number of
/// relevant items. Repeated items count once.
pub fn average_precision<S: AsRef<str>>(ranked: &[S], relevant: &BTreeSet<String>) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let mut seen = HashSet::new();
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, item) in ranked.iter().enumerate() {
        let item = item.as_ref();
        if relevant.contains(item) && seen.insert(item) {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    sum / relevant.len() as f64
}

/// Mean average precision over `runs`, judged on documents.
pub fn mean_average_precision<S: AsRef<str>>(
    runs: &[(String, Vec<S>)],
    qrels: &QrelSet,
) -> Result<f64> {
    if runs.is_empty() {
        return Err(Error::EmptyRetrieval("no queries to evaluate".into()));
    }
    let mut total = 0.0;
    for (qid, ranked) in runs {
        let q = qrels
            .get(qid)
            .ok_or_else(|| Error::Config(format!("query {qid:?} missing from qrels")))?;
        total += average_precision(ranked, &q.relevant_docs);
    }
    Ok(total / runs.len() as f64)
}

/// Lowercases, strips punctuation at the edges of each whitespace token,
/// drops tokens left empty, and joins with single spaces.
pub fn normalize_answer(s: &str) -> String {
    s.split_whitespace()
        .map(|tok| {
            tok.trim_matches(|c: char| c.is_ascii_punctuation() || c.is_ascii_control())
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// True when any normalized gold answer occurs in the normalized prediction.
pub fn exact_match<S: AsRef<str>>(prediction: &str, gold: &[S]) -> bool {
    let pred = normalize_answer(prediction);
    gold.iter().any(|g| {
        let g = normalize_answer(g.as_ref());
        !g.is_empty() && pred.contains(&g)
    })
}
