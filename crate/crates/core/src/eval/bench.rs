//! End-to-end comparison of learned codes, LSH, and exact search on
//! synthetic clustered data.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::harness::{run_eval, run_exact, summarize, EvalConfig, EvalReport, Summary};
use crate::eval::lsh::LshHasher;
use crate::eval::synth::{generate, SynthConfig, SynthData};
use crate::index::HammingIndex;
use crate::seed::derive_seed;
use crate::trainer::{train, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub seeds: Vec<u64>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            synth: SynthConfig::default(),
            train: TrainConfig {
                bits: 64,
                epochs: 40,
                batch_size: 32,
                learning_rate: 0.1,
                ..TrainConfig::default()
            },
            eval: EvalConfig {
                alpha: 100,
                j_props: 20,
                ks: vec![1, 5, 10, 20],
                workers: 1,
                ..EvalConfig::default()
            },
            seeds: vec![1, 2, 3],
        }
    }
}

/// Reports for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub learned: EvalReport,
    pub lsh: EvalReport,
    pub exact: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchOutcome {
    pub runs: Vec<SeedRun>,
}

impl BenchOutcome {
    fn over(&self, f: impl Fn(&SeedRun) -> f64) -> Summary {
        summarize(&self.runs.iter().map(f).collect::<Vec<_>>())
    }

    /// Recall at `k` for each method: (learned, lsh, exact).
    pub fn recall(&self, k: usize) -> (Summary, Summary, Summary) {
        let at = |r: &EvalReport| r.recall(k).unwrap_or(f64::NAN);
        (
            self.over(|s| at(&s.learned)),
            self.over(|s| at(&s.lsh)),
            self.over(|s| at(&s.exact)),
        )
    }

    pub fn map(&self) -> (Summary, Summary, Summary) {
        (
            self.over(|s| s.learned.map()),
            self.over(|s| s.lsh.map()),
            self.over(|s| s.exact.map()),
        )
    }
}

/// Learned-code retrieval on an already generated dataset.
pub fn eval_learned(data: &SynthData, train_cfg: &TrainConfig, eval: &EvalConfig) -> Result<EvalReport> {
    let trained = train(&data.corpus, &data.embeddings, Some(&data.triples), train_cfg)?;
    let index = HammingIndex::build(&trained.codes, data.corpus.prop_ids().map(String::from).collect())?;
    run_eval(
        "learned",
        &index,
        &trained.head,
        &data.query_vectors()?,
        &data.corpus,
        &data.qrels,
        eval,
    )
}

pub fn eval_lsh(data: &SynthData, bits: usize, seed: u64, eval: &EvalConfig) -> Result<EvalReport> {
    let props = data.proposition_embeddings()?;
    let hasher = LshHasher::new(props.dim(), bits, seed)?;
    let codes = hasher.codes((0..props.len()).map(|i| props.row(i)))?;
    let index = HammingIndex::build(&codes, props.ids().to_vec())?;
    run_eval(
        "lsh",
        &index,
        &hasher,
        &data.query_vectors()?,
        &data.corpus,
        &data.qrels,
        eval,
    )
}

pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchOutcome> {
    let mut runs = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let data = generate(&SynthConfig {
            seed: derive_seed(seed, "bench-data", 0),
            ..cfg.synth.clone()
        })?;
        let train_cfg = TrainConfig {
            seed: derive_seed(seed, "bench-train", 0),
            ..cfg.train.clone()
        };
        let learned = eval_learned(&data, &train_cfg, &cfg.eval)?;
        let lsh = eval_lsh(&data, cfg.train.bits, derive_seed(seed, "bench-lsh", 0), &cfg.eval)?;
        let exact = run_exact(
            &data.proposition_embeddings()?,
            &data.query_vectors()?,
            &data.corpus,
            &data.qrels,
            &cfg.eval,
        )?;
        runs.push(SeedRun {
            seed,
            learned,
            lsh,
            exact,
        });
    }
    Ok(BenchOutcome { runs })
}

/// Learned-code MAP for each `gamma`, averaged over seeds.
pub fn gamma_sweep(cfg: &BenchConfig, gammas: &[f64]) -> Result<Vec<(f64, Summary)>> {
    let data: Vec<(u64, SynthData)> = cfg
        .seeds
        .iter()
        .map(|&seed| {
            generate(&SynthConfig {
                seed: derive_seed(seed, "bench-data", 0),
                ..cfg.synth.clone()
            })
            .map(|d| (seed, d))
        })
        .collect::<Result<_>>()?;
    gammas
        .iter()
        .map(|&gamma| {
            let maps = data
                .iter()
                .map(|(seed, d)| {
                    let train_cfg = TrainConfig {
                        gamma,
                        seed: derive_seed(*seed, "bench-train", 0),
                        ..cfg.train.clone()
                    };
                    eval_learned(d, &train_cfg, &cfg.eval).map(|r| r.map())
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((gamma, summarize(&maps)))
        })
        .collect()
}
