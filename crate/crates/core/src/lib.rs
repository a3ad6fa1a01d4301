//! Learned binary hash codes over proposition-chunked corpora.
//!
//! The pipeline: [`trainer::train`] learns a query projection head and a code
//! matrix for the corpus, [`index::HammingIndex`] packs the codes for
//! popcount search with asymmetric re-ranking, and [`pgcc`] maps retrieved
//! propositions back to their documents and renders a prompt.

pub mod cli;
pub mod codes;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod index;
mod io;
pub mod pgcc;
pub mod seed;
pub mod trainer;

pub use codes::CodeMatrix;
pub use corpus::{Corpus, Document, Proposition};
pub use embedding::{EmbeddingMatrix, ProjectionHead};
pub use error::{Error, Result};
pub use eval::QueryEncoder;
pub use index::{HammingIndex, QueryCode};
pub use trainer::{train, TrainConfig};
