//! Command-line front end.
//!
//! Every subcommand reads an optional `--config` TOML file and lets flags
//! override it. Failures print one JSON object on standard error and exit
//! with 2 (input), 3 (empty result) or 4 (numeric failure).

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::codes::load_codes;
use crate::config::{require, RunConfig};
use crate::corpus::load_corpus;
use crate::embedding::{load_embeddings, load_head};
use crate::error::{Error, Result};
use crate::eval::{
    exact_match_rate, generate, load_qrels, load_queries, run_eval, table_csv, EvalConfig,
    SynthConfig,
};
use crate::index::{load_index, HammingIndex};
use crate::io::write_file;
use crate::pgcc::{apply_hybrid_scores, assemble_context, render_prompt, PromptTemplate};
use crate::trainer::{load_triples, train};
use crate::QueryEncoder;

#[derive(Debug, Parser)]
#[command(name = "hashrag", version, about = "Learned hash codes, Hamming search, and prompt assembly")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run seed; every module seed is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a query head and proposition codes.
    Train(TrainArgs),
    /// Pack a code file into a searchable index.
    BuildIndex(BuildIndexArgs),
    /// Retrieve propositions and documents for one query embedding.
    Query(QueryArgs),
    /// Score an index against queries and relevance judgments.
    Evaluate(EvaluateArgs),
    /// Render a prompt from a query result.
    Prompt(PromptArgs),
    /// Write a synthetic clustered dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Labeled triples; self-match training when absent.
    #[arg(long)]
    triples: Option<PathBuf>,
    /// Directory for head.hrh, codes.hrc and train_report.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    bits: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BuildIndexArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    codes: Option<PathBuf>,
    /// Index file to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    head: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<usize>,
    #[arg(long)]
    j_props: Option<usize>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[command(flatten)]
    search: SearchArgs,
    /// Id of the query vector inside the embeddings file.
    #[arg(long, conflicts_with = "vector")]
    query_id: Option<String>,
    /// Comma-separated query vector.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    vector: Option<Vec<f32>>,
    /// Question text carried into the result for prompt rendering.
    #[arg(long)]
    question: Option<String>,
    /// Result file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long)]
    qrels: Option<PathBuf>,
    /// JSONL of {"query_id", "prediction"} for exact match.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Report JSON; the CSV table is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PromptArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Output of `query`.
    #[arg(long)]
    result: PathBuf,
    /// Template file; the built-in open-domain QA template when absent.
    #[arg(long)]
    template: Option<PathBuf>,
    /// Overrides the question stored in the result.
    #[arg(long)]
    question: Option<String>,
    #[arg(long)]
    k_docs: Option<usize>,
    #[arg(long)]
    alpha_mix: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory to write the dataset into.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    per_cluster: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    query_noise_ratio: Option<f64>,
    #[arg(long)]
    train_queries: Option<usize>,
    #[arg(long)]
    test_queries: Option<usize>,
}

/// One retrieved proposition in a query result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedProposition {
    pub rank: usize,
    pub prop_id: String,
    pub doc_id: String,
    pub score: f64,
    pub distance: u32,
}

/// Output of the `query` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query_id: Option<String>,
    pub question: Option<String>,
    pub bits: usize,
    pub alpha: usize,
    pub j_props: usize,
    pub propositions: Vec<RankedProposition>,
    pub documents: Vec<String>,
    pub latency_ns: u64,
    pub candidates: usize,
    pub radius: u32,
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn set_path(slot: &mut Option<PathBuf>, flag: &Option<PathBuf>) {
    if flag.is_some() {
        slot.clone_from(flag);
    }
}

impl Cli {
    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        set(&mut cfg.seed, self.seed);
        Ok(cfg)
    }
}

impl SearchArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set_path(&mut cfg.paths.index, &self.index);
        set_path(&mut cfg.paths.corpus, &self.corpus);
        set_path(&mut cfg.paths.head, &self.head);
        set_path(&mut cfg.paths.embeddings, &self.embeddings);
        set(&mut cfg.search.alpha, self.alpha);
        set(&mut cfg.search.j_props, self.j_props);
    }
}

/// Parses the process arguments, runs, and maps errors to exit codes.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({
                "error": e.kind(),
                "exit_code": e.exit_code(),
                "message": e.to_string(),
            });
            eprintln!("{line}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut cfg = cli.run_config()?;
    match &cli.command {
        Command::Train(a) => cmd_train(&mut cfg, a),
        Command::BuildIndex(a) => cmd_build_index(&mut cfg, a),
        Command::Query(a) => cmd_query(&mut cfg, a),
        Command::Evaluate(a) => cmd_evaluate(&mut cfg, a),
        Command::Prompt(a) => cmd_prompt(&mut cfg, a),
        Command::Synth(a) => cmd_synth(&cfg, a),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut bytes = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut bytes, r)?;
        bytes.push(b'\n');
    }
    write_file(path, &bytes)
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn cmd_train(cfg: &mut RunConfig, a: &TrainArgs) -> Result<()> {
    set_path(&mut cfg.paths.corpus, &a.corpus);
    set_path(&mut cfg.paths.embeddings, &a.embeddings);
    set_path(&mut cfg.paths.triples, &a.triples);
    set_path(&mut cfg.paths.output, &a.out);
    let t = &mut cfg.train;
    set(&mut t.bits, a.bits);
    set(&mut t.gamma, a.gamma);
    set(&mut t.sigma, a.sigma);
    set(&mut t.epochs, a.epochs);
    set(&mut t.batch_size, a.batch_size);
    set(&mut t.learning_rate, a.learning_rate);
    if a.m.is_some() {
        t.m = a.m;
    }
    cfg.validate()?;

    let corpus = load_corpus(require(&cfg.paths.corpus, "corpus")?)?;
    let embeddings = load_embeddings(require(&cfg.paths.embeddings, "embeddings")?)?;
    let triples = cfg.paths.triples.as_deref().map(load_triples).transpose()?;
    let out = require(&cfg.paths.output, "output")?;

    let trained = train(&corpus, &embeddings, triples.as_deref(), &cfg.train_config())?;
    create_dir(out)?;
    trained.head.save(out.join("head.hrh"))?;
    trained.codes.save(out.join("codes.hrc"))?;
    write_json(&out.join("train_report.json"), &trained.report)
}

fn cmd_build_index(cfg: &mut RunConfig, a: &BuildIndexArgs) -> Result<()> {
    set_path(&mut cfg.paths.corpus, &a.corpus);
    set_path(&mut cfg.paths.codes, &a.codes);
    let out = a.out.clone().or_else(|| cfg.paths.index.clone());
    let corpus = load_corpus(require(&cfg.paths.corpus, "corpus")?)?;
    let codes = load_codes(require(&cfg.paths.codes, "codes")?)?;
    let index = HammingIndex::build(&codes, corpus.prop_ids().map(String::from).collect())?;
    index.save(require(&out, "index")?)
}

fn cmd_query(cfg: &mut RunConfig, a: &QueryArgs) -> Result<()> {
    a.search.apply(cfg);
    cfg.search.validate()?;
    let index = load_index(require(&cfg.paths.index, "index")?)?;
    let corpus = load_corpus(require(&cfg.paths.corpus, "corpus")?)?;
    let head = load_head(require(&cfg.paths.head, "head")?)?;
    check_index(&index, &corpus)?;

    let vector = match (&a.query_id, &a.vector) {
        (_, Some(v)) => v.clone(),
        (Some(id), None) => load_embeddings(require(&cfg.paths.embeddings, "embeddings")?)?
            .require(id)?
            .to_vec(),
        (None, None) => {
            return Err(Error::Config("give --query-id or --vector".into()));
        }
    };
    if let Some((col, _)) = vector.iter().enumerate().find(|(_, x)| !x.is_finite()) {
        return Err(Error::NonFinite { row: 0, col });
    }

    let mut j = cfg.search.j_props;
    if j > index.len() {
        eprintln!(
            "warning: j_props = {j} exceeds the {} indexed propositions; clamped",
            index.len()
        );
        j = index.len();
    }
    let code = head.encode(&vector)?;
    let found = index.search(&code, cfg.search.alpha.max(j), j)?;
    let propositions: Vec<RankedProposition> = found
        .ranked
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let prop_id = index.prop_id(c.row).to_string();
            let doc_id = corpus.parent_of_row(c.row as usize).doc_id.clone();
            RankedProposition {
                rank: i + 1,
                prop_id,
                doc_id,
                score: f64::from(c.score),
                distance: c.distance,
            }
        })
        .collect();
    let documents = corpus.docs_of(&propositions.iter().map(|p| &p.prop_id).collect::<Vec<_>>())?;
    let result = QueryResult {
        query_id: a.query_id.clone(),
        question: a.question.clone(),
        bits: index.bits(),
        alpha: cfg.search.alpha,
        j_props: j,
        propositions,
        documents,
        latency_ns: found.stats.nanos,
        candidates: found.stats.candidates,
        radius: found.stats.radius,
    };
    match &a.out {
        Some(p) => write_json(p, &result),
        None => {
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, &result)?;
            writeln!(stdout).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn check_index(index: &HammingIndex, corpus: &crate::Corpus) -> Result<()> {
    if index.len() != corpus.len() || !index.prop_ids().iter().map(String::as_str).eq(corpus.prop_ids()) {
        return Err(Error::Shape("index rows do not match the corpus propositions".into()));
    }
    Ok(())
}

#[derive(Deserialize)]
struct Prediction {
    query_id: String,
    prediction: String,
}

fn load_predictions(path: &Path) -> Result<BTreeMap<String, String>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.insert(p.query_id, p.prediction);
    }
    Ok(out)
}

fn cmd_evaluate(cfg: &mut RunConfig, a: &EvaluateArgs) -> Result<()> {
    a.search.apply(cfg);
    set_path(&mut cfg.paths.queries, &a.queries);
    set_path(&mut cfg.paths.qrels, &a.qrels);
    set_path(&mut cfg.paths.output, &a.out);
    set(&mut cfg.search.workers, a.workers);
    cfg.search.validate()?;

    let qrels = load_qrels(require(&cfg.paths.qrels, "qrels")?)?;
    let queries = load_queries(require(&cfg.paths.queries, "queries")?)?;
    let index = load_index(require(&cfg.paths.index, "index")?)?;
    let corpus = load_corpus(require(&cfg.paths.corpus, "corpus")?)?;
    let head = load_head(require(&cfg.paths.head, "head")?)?;
    let embeddings = load_embeddings(require(&cfg.paths.embeddings, "embeddings")?)?;
    let out = require(&cfg.paths.output, "output")?;
    check_index(&index, &corpus)?;
    if queries.is_empty() {
        return Err(Error::EmptyRetrieval("no queries to evaluate".into()));
    }

    let vectors = queries
        .iter()
        .map(|q| Ok((q.query_id.as_str(), embeddings.require(&q.query_id)?)))
        .collect::<Result<Vec<_>>>()?;
    let eval = EvalConfig {
        alpha: cfg.search.alpha,
        j_props: cfg.search.j_props,
        ks: cfg.search.ks.clone(),
        workers: cfg.search.workers,
        ..EvalConfig::default()
    };
    let mut report = run_eval("learned", &index, &head, &vectors, &corpus, &qrels, &eval)?;
    if let Some(p) = &a.predictions {
        report.em = Some(exact_match_rate(&load_predictions(p)?, &queries)?);
    }
    write_json(out, &report)?;
    write_file(out.with_extension("csv"), table_csv(&[report]).as_bytes())
}

fn cmd_prompt(cfg: &mut RunConfig, a: &PromptArgs) -> Result<()> {
    set_path(&mut cfg.paths.corpus, &a.corpus);
    set_path(&mut cfg.paths.template, &a.template);
    set_path(&mut cfg.paths.output, &a.out);
    set(&mut cfg.search.k_docs, a.k_docs);
    set(&mut cfg.search.alpha_mix, a.alpha_mix);
    cfg.search.validate()?;

    let corpus = load_corpus(require(&cfg.paths.corpus, "corpus")?)?;
    let bytes = crate::io::read_file(&a.result)?;
    let result: QueryResult = serde_json::from_slice(&bytes)?;
    let template = match &cfg.paths.template {
        Some(p) => PromptTemplate::load(p)?,
        None => PromptTemplate::open_domain_qa(),
    };
    let out = require(&cfg.paths.output, "output")?;
    if result.propositions.is_empty() {
        return Err(Error::EmptyRetrieval("query result has no propositions".into()));
    }

    let ranked: Vec<&str> = result.propositions.iter().map(|p| p.prop_id.as_str()).collect();
    let question = a.question.clone().or(result.question).unwrap_or_default();
    let mut bundle = assemble_context(&corpus, &ranked, cfg.search.k_docs)?.with_question(question);
    let raw: Vec<(String, f64)> = result
        .propositions
        .iter()
        .map(|p| (p.prop_id.clone(), p.score))
        .collect();
    apply_hybrid_scores(&mut bundle, &raw, cfg.search.alpha_mix)?;
    write_file(out, render_prompt(&bundle, &template)?.as_bytes())
}

fn cmd_synth(cfg: &RunConfig, a: &SynthArgs) -> Result<()> {
    let mut s = SynthConfig {
        seed: cfg.seed,
        ..SynthConfig::default()
    };
    set(&mut s.clusters, a.clusters);
    set(&mut s.per_cluster, a.per_cluster);
    set(&mut s.dim, a.dim);
    set(&mut s.noise, a.noise);
    set(&mut s.query_noise_ratio, a.query_noise_ratio);
    set(&mut s.train_queries_per_cluster, a.train_queries);
    set(&mut s.test_queries_per_cluster, a.test_queries);
    let data = generate(&s)?;

    create_dir(&a.out)?;
    data.corpus.save(a.out.join("corpus.jsonl"))?;
    data.embeddings.save(a.out.join("embeddings.hre"))?;
    write_jsonl(&a.out.join("queries.jsonl"), &data.queries)?;
    write_jsonl(&a.out.join("triples.jsonl"), &data.triples)?;
    let mut qrels = Vec::new();
    data.qrels.write_jsonl(&mut qrels)?;
    write_file(a.out.join("qrels.jsonl"), &qrels)
}
