//! Metrics, baselines, synthetic data, and the evaluation harness.

mod bench;
mod harness;
pub mod lsh;
pub mod metrics;
pub mod synth;

pub use bench::*;
pub use harness::*;
pub use lsh::{lsh_baseline, LshHasher};
pub use metrics::{
    average_precision, exact_match, load_qrels, mean_average_precision, normalize_answer,
    recall_at_k, Qrel, QrelSet,
};
pub use synth::{generate, synth_corpus, Query, SynthConfig, SynthData};
