//! Asymmetric alternating optimization of query head and proposition codes.
//!
//! Each epoch runs a θ-step (minibatch SGD on the projection head with the
//! codes fixed) followed by one H-step sweep (closed-form column updates of
//! the codes with the head fixed).

mod hstep;
mod objective;
mod supervision;

use std::time::Instant;

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codes::CodeMatrix;
use crate::corpus::Corpus;
use crate::embedding::{beta_schedule, binarize, EmbeddingMatrix, ProjectionHead};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

pub use hstep::{h_step, ColumnUpdater};
pub use objective::{
    array_to_codes, code_objective, codes_to_array, pairwise_loss, theta_step_gradient,
    HeadGradient,
};
pub use supervision::{build_supervision, load_triples, RowSource, SupervisionSet, Triple};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Code length in bits; a multiple of 64.
    pub bits: usize,
    /// Weight of the quantization term tying relaxed codes to anchor codes.
    pub gamma: f64,
    /// Growth rate of the tanh sharpness schedule.
    pub sigma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Fraction of all optimizer steps spent in linear learning-rate warm-up.
    pub warmup_fraction: f64,
    /// Sampled propositions per epoch in self-match mode; all when `None`.
    pub m: Option<usize>,
    /// Redraw the self-match sample every epoch instead of once.
    pub resample_omega: bool,
    /// Skip the θ-step (codes only).
    pub freeze_head: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            bits: 256,
            gamma: 200.0,
            sigma: 0.1,
            epochs: 40,
            batch_size: 128,
            learning_rate: 1e-3,
            warmup_fraction: 0.1,
            m: None,
            resample_omega: false,
            freeze_head: false,
            seed: 0x5eed,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.bits == 0 || !self.bits.is_multiple_of(64) {
            return bad(format!("bits = {} must be a positive multiple of 64", self.bits));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma = {} must be non-negative", self.gamma));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma = {} must be positive", self.sigma));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate = {} must be positive", self.learning_rate));
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return bad(format!("warmup_fraction = {} outside [0, 1]", self.warmup_fraction));
        }
        if self.m == Some(0) {
            return bad("m must be positive".into());
        }
        Ok(())
    }
}

/// Per-epoch training trace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Full loss after each epoch's H-step.
    pub objective: Vec<f64>,
    /// Code entries changed by each epoch's H-step.
    pub flips: Vec<usize>,
    /// Sharpness in effect at each H-step.
    pub beta: Vec<f64>,
    /// Optimizer steps completed by the end of each epoch.
    pub steps: Vec<u64>,
    pub seconds: Vec<f64>,
    pub mode: String,
    pub rows: usize,
}

/// Output of [`train`].
#[derive(Debug, Clone)]
pub struct Trained {
    pub head: ProjectionHead,
    pub codes: CodeMatrix,
    pub report: TrainReport,
}

/// Learns a query head and proposition codes.
///
/// Labeled mode is used when `triples` is non-empty; the embedding matrix
/// must then hold every query id as well as every proposition id.
pub fn train(
    corpus: &Corpus,
    embeddings: &EmbeddingMatrix,
    triples: Option<&[Triple]>,
    config: &TrainConfig,
) -> Result<Trained> {
    config.validate()?;
    let n = corpus.len();
    let prop_vecs = corpus
        .prop_ids()
        .map(|id| embeddings.require(id))
        .collect::<Result<Vec<_>>>()?;

    let labeled = triples.is_some_and(|t| !t.is_empty());
    let m = config.m.unwrap_or(n);
    let mut sup = build_supervision(corpus, triples, m, derive_seed(config.seed, "omega", 0))?;
    let row_vecs = |sup: &SupervisionSet| -> Result<Vec<&[f32]>> {
        sup.sources
            .iter()
            .map(|src| match src {
                RowSource::Query(id) => embeddings.require(id),
                RowSource::Proposition(j) => Ok(prop_vecs[*j]),
            })
            .collect()
    };
    let mut rows = row_vecs(&sup)?;

    let mut head = ProjectionHead::random(
        config.bits,
        embeddings.dim(),
        derive_seed(config.seed, "head", 0),
    )?;
    let mut codes = initial_codes(&head, &prop_vecs)?;

    let steps_per_epoch = sup.rows().div_ceil(config.batch_size) as u64;
    let total_steps = steps_per_epoch * config.epochs as u64;
    let warmup = ((total_steps as f64) * config.warmup_fraction).ceil() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "batches", 0));

    let mut report = TrainReport {
        mode: if labeled { "labeled" } else { "self-match" }.into(),
        rows: sup.rows(),
        ..TrainReport::default()
    };
    let mut step = 0u64;

    for epoch in 0..config.epochs {
        let started = Instant::now();
        if !labeled && config.resample_omega && epoch > 0 {
            sup = SupervisionSet::self_match(n, m, derive_seed(config.seed, "omega", epoch as u64))?;
            rows = row_vecs(&sup)?;
        }

        if !config.freeze_head {
            let mut order: Vec<usize> = (0..sup.rows()).collect();
            order.shuffle(&mut rng);
            for batch in order.chunks(config.batch_size) {
                let beta = beta_schedule(step, config.sigma);
                let mut grad = HeadGradient::zeros(head.bits(), head.input_dim());
                for &i in batch {
                    let relaxed = ndarray::Array1::from(head.relaxed_code(rows[i], beta)?);
                    let pre = objective::preactivation_gradient(
                        relaxed.view(),
                        codes.view(),
                        sup.s.row(i),
                        sup.omega[i],
                        config.gamma,
                        beta,
                    );
                    grad.accumulate(pre.as_slice().expect("contiguous"), rows[i]);
                }
                let warm = if warmup == 0 {
                    1.0
                } else {
                    ((step + 1) as f64 / warmup as f64).min(1.0)
                };
                // Minibatch loss normalized by rows x propositions.
                let scale = config.learning_rate * warm / (batch.len() * n) as f64;
                apply_sgd(&mut head, &grad, scale)?;
                step += 1;
            }
        }

        let beta = beta_schedule(step, config.sigma);
        let relaxed = objective::relaxed_matrix(&head, rows.iter().copied(), beta)?;
        let updater = ColumnUpdater::new(relaxed.view(), sup.s.view(), &sup.omega, config.gamma, n)?;
        let flips = updater.sweep(&mut codes);
        let loss = pairwise_loss(
            relaxed.view(),
            codes.view(),
            sup.s.view(),
            &sup.omega,
            config.gamma,
        )?;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite loss at epoch {epoch} (step {step}, beta {beta})"
            )));
        }
        report.objective.push(loss);
        report.flips.push(flips);
        report.beta.push(beta);
        report.steps.push(step);
        report.seconds.push(started.elapsed().as_secs_f64());
    }

    Ok(Trained {
        head,
        codes: array_to_codes(&codes)?,
        report,
    })
}

/// Codes start as the signs of the initial head's proposition projections.
fn initial_codes(head: &ProjectionHead, props: &[&[f32]]) -> Result<Array2<f64>> {
    let mut h = Array2::zeros((props.len(), head.bits()));
    for (mut row, v) in h.outer_iter_mut().zip(props) {
        let signs = binarize(&head.project(v)?);
        row.assign(&ArrayView1::from(&signs).mapv(f64::from));
    }
    Ok(h)
}

fn apply_sgd(head: &mut ProjectionHead, grad: &HeadGradient, scale: f64) -> Result<()> {
    for (w, g) in head.weights_mut().iter_mut().zip(&grad.weights) {
        *w -= scale * g;
    }
    for (b, g) in head.bias_mut().iter_mut().zip(&grad.bias) {
        *b -= scale * g;
    }
    if head.weights().iter().chain(head.bias()).any(|x| !x.is_finite()) {
        return Err(Error::Numeric("head parameters diverged".into()));
    }
    Ok(())
}
