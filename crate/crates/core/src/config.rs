//! Run configuration: one TOML file, overridden by command-line flags.
//!
//! ```toml
//! seed = 7
//!
//! [paths]
//! corpus = "corpus.jsonl"
//! embeddings = "embeddings.hre"
//!
//! [train]
//! bits = 64
//! gamma = 200.0
//!
//! [search]
//! alpha = 200
//! j_props = 100
//! ```
//!
//! `train.seed` is ignored; every module seed is derived from the top-level
//! `seed`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub triples: Option<PathBuf>,
    pub head: Option<PathBuf>,
    pub codes: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub qrels: Option<PathBuf>,
    pub template: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Candidate target for radius expansion.
    pub alpha: usize,
    /// Propositions kept after re-ranking.
    pub j_props: usize,
    /// Documents kept in the prompt.
    pub k_docs: usize,
    /// Weight of the document-level score in hybrid scoring.
    pub alpha_mix: f64,
    pub ks: Vec<usize>,
    pub workers: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            alpha: 200,
            j_props: 100,
            k_docs: 20,
            alpha_mix: 0.5,
            ks: vec![1, 5, 10, 20, 100],
            workers: 1,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha == 0 || self.j_props == 0 || self.k_docs == 0 {
            return Err(Error::Config("alpha, j_props and k_docs must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha_mix) {
            return Err(Error::Config(format!("alpha_mix = {} outside [0, 1]", self.alpha_mix)));
        }
        if self.ks.contains(&0) {
            return Err(Error::Config("recall cutoffs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub train: TrainConfig,
    pub search: SearchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0x5eed,
            paths: Paths::default(),
            train: TrainConfig::default(),
            search: SearchConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads a TOML file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.paths.rebase(base);
        }
        Ok(cfg)
    }

    /// Training settings with the seed derived from the run seed.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: derive_seed(self.seed, "train", 0),
            ..self.train.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.search.validate()
    }
}

impl Paths {
    fn rebase(&mut self, base: &Path) {
        for p in [
            &mut self.corpus,
            &mut self.embeddings,
            &mut self.triples,
            &mut self.head,
            &mut self.codes,
            &mut self.index,
            &mut self.queries,
            &mut self.qrels,
            &mut self.template,
            &mut self.output,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// The path or a config error naming the missing setting.
pub fn require<'a>(path: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Config(format!("no {name} path given (flag or [paths].{name})")))
}
