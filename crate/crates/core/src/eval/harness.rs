use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embedding::{EmbeddingMatrix, ProjectionHead};
use crate::error::{Error, Result};
use crate::eval::lsh::LshHasher;
use crate::eval::metrics::{average_precision, exact_match, recall_at_k, QrelSet};
use crate::eval::synth::Query;
use crate::index::{HammingIndex, QueryCode};

/// Maps a query embedding to a searchable code.
pub trait QueryEncoder: Sync {
    fn bits(&self) -> usize;
    fn encode(&self, v: &[f32]) -> Result<QueryCode>;
}

impl QueryEncoder for ProjectionHead {
    fn bits(&self) -> usize {
        ProjectionHead::bits(self)
    }

    fn encode(&self, v: &[f32]) -> Result<QueryCode> {
        Ok(QueryCode::from_real(&self.project(v)?))
    }
}

impl QueryEncoder for LshHasher {
    fn bits(&self) -> usize {
        LshHasher::bits(self)
    }

    fn encode(&self, v: &[f32]) -> Result<QueryCode> {
        Ok(QueryCode::from_real(&self.project(v)?))
    }
}

pub fn load_queries(path: impl AsRef<Path>) -> Result<Vec<Query>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// How candidates are produced for each query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Radius expansion to `alpha`, then asymmetric re-ranking to `j_props`.
    #[default]
    RadiusRerank,
    /// Exact Hamming top-`j_props` by full scan.
    HammingScan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub alpha: usize,
    pub j_props: usize,
    pub ks: Vec<usize>,
    /// Threads for fanning out queries; 0 or 1 runs sequentially.
    pub workers: usize,
    pub strategy: Strategy,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            alpha: 200,
            j_props: 100,
            ks: vec![1, 5, 10, 20, 100],
            workers: 1,
            strategy: Strategy::RadiusRerank,
        }
    }
}

/// Ranked output for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRun {
    pub query_id: String,
    pub props: Vec<String>,
    pub docs: Vec<String>,
    pub nanos: u64,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub queries: usize,
    /// Any-hit recall over deduplicated documents, keyed by k.
    pub recall_docs: BTreeMap<usize, f64>,
    /// Any-hit recall over propositions; present when qrels judge them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall_props: Option<BTreeMap<usize, f64>>,
    pub map_docs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map_props: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub em: Option<f64>,
    pub mean_nanos: f64,
    pub median_nanos: f64,
    pub p99_nanos: f64,
    pub index_bytes: usize,
    pub mean_candidates: f64,
}

impl EvalReport {
    /// Proposition recall at `k` if judged, else document recall.
    pub fn recall(&self, k: usize) -> Option<f64> {
        self.recall_props
            .as_ref()
            .unwrap_or(&self.recall_docs)
            .get(&k)
            .copied()
    }

    pub fn map(&self) -> f64 {
        self.map_props.unwrap_or(self.map_docs)
    }
}

fn pool(workers: usize) -> Result<Option<rayon::ThreadPool>> {
    if workers <= 1 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map(Some)
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn fan_out<T, F>(workers: usize, queries: &[(&str, &[f32])], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&str, &[f32]) -> Result<T> + Sync,
{
    match pool(workers)? {
        None => queries.iter().map(|(id, v)| f(id, v)).collect(),
        Some(p) => p.install(|| queries.par_iter().map(|(id, v)| f(id, v)).collect()),
    }
}

/// Runs every query through `index` and scores the rankings.
///
/// Latency covers candidate generation and re-ranking only.
pub fn run_eval(
    method: &str,
    index: &HammingIndex,
    encoder: &dyn QueryEncoder,
    queries: &[(&str, &[f32])],
    corpus: &Corpus,
    qrels: &QrelSet,
    config: &EvalConfig,
) -> Result<EvalReport> {
    if encoder.bits() != index.bits() {
        return Err(Error::Shape(format!(
            "encoder emits {} bits, index holds {}",
            encoder.bits(),
            index.bits()
        )));
    }
    if index.len() != corpus.len() {
        return Err(Error::Shape(format!(
            "index has {} rows, corpus {} propositions",
            index.len(),
            corpus.len()
        )));
    }
    let runs = fan_out(config.workers, queries, |qid, v| {
        let code = encoder.encode(v)?;
        let j = config.j_props.clamp(1, index.len());
        let (ranked, nanos, candidates) = match config.strategy {
            Strategy::RadiusRerank => {
                let r = index.search(&code, config.alpha.max(j), j)?;
                (r.ranked, r.stats.nanos, r.stats.candidates)
            }
            Strategy::HammingScan => {
                let started = Instant::now();
                let c = index.full_scan_topk(&code, j)?;
                let nanos = started.elapsed().as_nanos() as u64;
                let n = c.len();
                (c.candidates, nanos, n)
            }
        };
        let props: Vec<String> = ranked
            .iter()
            .map(|c| index.prop_id(c.row).to_string())
            .collect();
        let docs = corpus.docs_of(&props)?;
        Ok(QueryRun {
            query_id: qid.to_string(),
            props,
            docs,
            nanos,
            candidates,
        })
    })?;
    let mut report = score_runs(method, &runs, qrels, &config.ks)?;
    report.index_bytes = index.index_bytes();
    Ok(report)
}

/// Exact inner-product ranking over real proposition embeddings.
pub fn run_exact(
    props: &EmbeddingMatrix,
    queries: &[(&str, &[f32])],
    corpus: &Corpus,
    qrels: &QrelSet,
    config: &EvalConfig,
) -> Result<EvalReport> {
    if props.len() != corpus.len() {
        return Err(Error::Shape("embedding rows differ from corpus size".into()));
    }
    let j = config.j_props.clamp(1, props.len());
    let runs = fan_out(config.workers, queries, |qid, v| {
        if v.len() != props.dim() {
            return Err(Error::Shape(format!(
                "query dim {} vs corpus dim {}",
                v.len(),
                props.dim()
            )));
        }
        let started = Instant::now();
        let top = exact_topk(props, v, j);
        let nanos = started.elapsed().as_nanos() as u64;
        let ids: Vec<String> = top.iter().map(|&(row, _)| props.ids()[row].clone()).collect();
        let docs = corpus.docs_of(&ids)?;
        Ok(QueryRun {
            query_id: qid.to_string(),
            props: ids,
            docs,
            nanos,
            candidates: props.len(),
        })
    })?;
    let mut report = score_runs("exact", &runs, qrels, &config.ks)?;
    report.index_bytes = props.len() * props.dim() * 4;
    Ok(report)
}

/// Inner product with eight independent accumulators, so the loop
/// vectorizes without reassociating a single running sum.
#[inline]
pub fn dot_f32(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f32 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for lane in 0..8 {
            acc[lane] += x[lane] * y[lane];
        }
    }
    acc.iter().sum::<f32>() + tail
}

/// Top `k` rows by inner product, ties by row.
pub fn exact_topk(props: &EmbeddingMatrix, v: &[f32], k: usize) -> Vec<(usize, f32)> {
    let dim = props.dim();
    let mut scored: Vec<(usize, f32)> = props
        .data()
        .chunks_exact(dim)
        .map(|row| dot_f32(row, v))
        .enumerate()
        .collect();
    let cmp = |a: &(usize, f32), b: &(usize, f32)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    let k = k.min(scored.len());
    if k > 0 && k < scored.len() {
        scored.select_nth_unstable_by(k - 1, cmp);
    }
    scored.truncate(k);
    scored.sort_unstable_by(cmp);
    scored
}

/// Metrics over completed runs, in input order.
pub fn score_runs(
    method: &str,
    runs: &[QueryRun],
    qrels: &QrelSet,
    ks: &[usize],
) -> Result<EvalReport> {
    if runs.is_empty() {
        return Err(Error::EmptyRetrieval("no queries to evaluate".into()));
    }
    let ks: BTreeSet<usize> = ks.iter().copied().collect();
    if ks.contains(&0) {
        return Err(Error::Config("recall cutoffs must be at least 1".into()));
    }
    let with_props = qrels.has_prop_judgments();
    let mut recall_docs: BTreeMap<usize, f64> = ks.iter().map(|&k| (k, 0.0)).collect();
    let mut recall_props = recall_docs.clone();
    let (mut map_docs, mut map_props) = (0.0, 0.0);
    for run in runs {
        let q = qrels
            .get(&run.query_id)
            .ok_or_else(|| Error::Config(format!("query {:?} missing from qrels", run.query_id)))?;
        for &k in &ks {
            *recall_docs.get_mut(&k).unwrap() += recall_at_k(&run.docs, &q.relevant_docs, k);
            if with_props {
                *recall_props.get_mut(&k).unwrap() += recall_at_k(&run.props, &q.relevant_props, k);
            }
        }
        map_docs += average_precision(&run.docs, &q.relevant_docs);
        if with_props {
            map_props += average_precision(&run.props, &q.relevant_props);
        }
    }
    let n = runs.len() as f64;
    recall_docs.values_mut().for_each(|v| *v /= n);
    recall_props.values_mut().for_each(|v| *v /= n);

    let mut nanos: Vec<f64> = runs.iter().map(|r| r.nanos as f64).collect();
    nanos.sort_by(f64::total_cmp);
    Ok(EvalReport {
        method: method.to_string(),
        queries: runs.len(),
        recall_docs,
        recall_props: with_props.then_some(recall_props),
        map_docs: map_docs / n,
        map_props: with_props.then_some(map_props / n),
        em: None,
        mean_nanos: nanos.iter().sum::<f64>() / n,
        median_nanos: percentile(&nanos, 0.5),
        p99_nanos: percentile(&nanos, 0.99),
        index_bytes: 0,
        mean_candidates: runs.iter().map(|r| r.candidates as f64).sum::<f64>() / n,
    })
}

/// Nearest-rank percentile of sorted values.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Fraction of queries whose prediction contains a gold answer.
pub fn exact_match_rate(predictions: &BTreeMap<String, String>, queries: &[Query]) -> Result<f64> {
    if queries.is_empty() {
        return Err(Error::EmptyRetrieval("no queries to evaluate".into()));
    }
    let mut hits = 0usize;
    for q in queries {
        let pred = predictions
            .get(&q.query_id)
            .ok_or_else(|| Error::Config(format!("no prediction for query {:?}", q.query_id)))?;
        hits += usize::from(exact_match(pred, &q.gold_answers));
    }
    Ok(hits as f64 / queries.len() as f64)
}

/// Mean and standard error over repeated runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary { mean: f64::NAN, stderr: f64::NAN, n };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let stderr = if n < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    };
    Summary { mean, stderr, n }
}

/// Table with one row per method: recall at each k (percent), index size
/// in bytes, and mean query time in milliseconds.
pub fn table_csv(reports: &[EvalReport]) -> String {
    let ks: BTreeSet<usize> = reports
        .iter()
        .flat_map(|r| r.recall_docs.keys().copied())
        .collect();
    let mut out = String::from("method");
    for k in &ks {
        out.push_str(&format!(",top{k}"));
    }
    out.push_str(",index_bytes,query_ms\n");
    for r in reports {
        out.push_str(&r.method);
        for k in &ks {
            match r.recall(*k) {
                Some(v) => out.push_str(&format!(",{:.1}", 100.0 * v)),
                None => out.push(','),
            }
        }
        out.push_str(&format!(",{},{:.4}\n", r.index_bytes, r.mean_nanos / 1e6));
    }
    out
}
