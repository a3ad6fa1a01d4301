//! Synthetic clustered corpora with known relevance.
//!
//! Cluster centers are drawn uniformly on the unit sphere. Each cluster is
//! one document; its propositions are the center plus isotropic Gaussian
//! noise. Queries are perturbed centers whose relevant set is their own
//! cluster. Training queries come with triples (positives: the cluster,
//! negatives: a sample of other clusters' propositions).

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, Proposition};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::eval::metrics::{Qrel, QrelSet};
use crate::seed::derive_seed;
use crate::trainer::Triple;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub clusters: usize,
    pub per_cluster: usize,
    pub dim: usize,
    /// Per-component standard deviation of proposition noise.
    pub noise: f64,
    /// Query noise as a multiple of `noise`.
    pub query_noise_ratio: f64,
    pub train_queries_per_cluster: usize,
    pub test_queries_per_cluster: usize,
    pub negatives_per_query: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            clusters: 8,
            per_cluster: 125,
            dim: 512,
            noise: 0.1,
            query_noise_ratio: 2.0,
            train_queries_per_cluster: 125,
            test_queries_per_cluster: 16,
            negatives_per_query: 8,
            seed: 7,
        }
    }
}

/// A test query: id, text, gold answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub text: String,
    #[serde(default)]
    pub gold_answers: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub corpus: Corpus,
    /// Propositions, training queries, and test queries.
    pub embeddings: EmbeddingMatrix,
    pub queries: Vec<Query>,
    pub qrels: QrelSet,
    pub triples: Vec<Triple>,
    /// Cluster of each proposition, in corpus order.
    pub labels: Vec<usize>,
}

impl SynthData {
    pub fn query_vectors(&self) -> Result<Vec<(&str, &[f32])>> {
        self.queries
            .iter()
            .map(|q| Ok((q.query_id.as_str(), self.embeddings.require(&q.query_id)?)))
            .collect()
    }

    /// Proposition embeddings only, in corpus order.
    pub fn proposition_embeddings(&self) -> Result<EmbeddingMatrix> {
        let ids: Vec<String> = self.corpus.prop_ids().map(String::from).collect();
        let mut data = Vec::with_capacity(ids.len() * self.embeddings.dim());
        for id in &ids {
            data.extend_from_slice(self.embeddings.require(id)?);
        }
        EmbeddingMatrix::new(ids, self.embeddings.dim(), data)
    }
}

/// Generates a corpus with the default query and triple settings.
pub fn synth_corpus(
    clusters: usize,
    per_cluster: usize,
    dim: usize,
    noise: f64,
    seed: u64,
) -> Result<SynthData> {
    generate(&SynthConfig {
        clusters,
        per_cluster,
        dim,
        noise,
        seed,
        ..SynthConfig::default()
    })
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    if cfg.clusters == 0 || cfg.per_cluster == 0 || cfg.dim == 0 {
        return Err(Error::Config("synthetic sizes must be positive".into()));
    }
    if !(cfg.noise >= 0.0 && cfg.query_noise_ratio >= 0.0) {
        return Err(Error::Config("noise must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "synth", 0));
    let gauss = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };

    let centers: Vec<Vec<f64>> = (0..cfg.clusters)
        .map(|_| loop {
            let v: Vec<f64> = (0..cfg.dim).map(|_| gauss(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|x| x / norm).collect();
            }
        })
        .collect();

    let mut ids = Vec::new();
    let mut data: Vec<f32> = Vec::new();
    let perturbed = |rng: &mut ChaCha8Rng, c: &[f64], sd: f64, data: &mut Vec<f32>| {
        data.extend(c.iter().map(|&x| (x + sd * gauss(rng)) as f32));
    };

    let mut documents = Vec::with_capacity(cfg.clusters);
    let mut propositions = Vec::with_capacity(cfg.clusters * cfg.per_cluster);
    let mut labels = Vec::with_capacity(cfg.clusters * cfg.per_cluster);
    for (c, center) in centers.iter().enumerate() {
        let doc_id = format!("doc{c}");
        documents.push(Document {
            doc_id: doc_id.clone(),
            title: format!("Cluster {c}"),
            text: format!("Synthetic document for cluster {c}."),
        });
        for i in 0..cfg.per_cluster {
            let prop_id = format!("p{c}-{i}");
            propositions.push(Proposition {
                prop_id: prop_id.clone(),
                doc_id: doc_id.clone(),
                ordinal: i as u32,
                text: format!("Synthetic proposition {i} of cluster {c}."),
            });
            labels.push(c);
            ids.push(prop_id);
            perturbed(&mut rng, center, cfg.noise, &mut data);
        }
    }

    let query_sd = cfg.noise * cfg.query_noise_ratio;
    let cluster_props = |c: usize| -> Vec<String> {
        (0..cfg.per_cluster).map(|i| format!("p{c}-{i}")).collect()
    };

    let mut triples = Vec::new();
    let others = (cfg.clusters - 1) * cfg.per_cluster;
    for (c, center) in centers.iter().enumerate() {
        for i in 0..cfg.train_queries_per_cluster {
            let query_id = format!("train-q{c}-{i}");
            ids.push(query_id.clone());
            perturbed(&mut rng, center, query_sd, &mut data);
            let mut positive = cluster_props(c);
            // Distinct anchors within a cluster while queries <= props.
            positive.rotate_left(i % cfg.per_cluster);
            let negative = if others == 0 {
                Vec::new()
            } else {
                sample(&mut rng, others, cfg.negatives_per_query.min(others))
                    .into_iter()
                    .map(|k| {
                        let cc = k / cfg.per_cluster;
                        let cc = if cc >= c { cc + 1 } else { cc };
                        format!("p{cc}-{}", k % cfg.per_cluster)
                    })
                    .collect()
            };
            triples.push(Triple {
                query_id,
                positive,
                negative,
            });
        }
    }

    let mut queries = Vec::new();
    let mut qrels = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for i in 0..cfg.test_queries_per_cluster {
            let query_id = format!("q{c}-{i}");
            ids.push(query_id.clone());
            perturbed(&mut rng, center, query_sd, &mut data);
            queries.push(Query {
                query_id: query_id.clone(),
                text: format!("Which cluster does query {i} come from?"),
                gold_answers: vec![format!("Cluster {c}")],
            });
            qrels.push(Qrel {
                query_id,
                relevant_docs: BTreeSet::from([format!("doc{c}")]),
                relevant_props: cluster_props(c).into_iter().collect(),
            });
        }
    }

    Ok(SynthData {
        corpus: Corpus::new(documents, propositions)?,
        embeddings: EmbeddingMatrix::new(ids, cfg.dim, data)?,
        queries,
        qrels: QrelSet::new(qrels)?,
        triples,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = synth_corpus(3, 5, 8, 0.1, 1).unwrap();
        let b = synth_corpus(3, 5, 8, 0.1, 1).unwrap();
        assert_eq!(a.embeddings, b.embeddings);
        assert_eq!(a.triples, b.triples);
        let c = synth_corpus(3, 5, 8, 0.1, 2).unwrap();
        assert_ne!(a.embeddings, c.embeddings);
    }

    #[test]
    fn shapes() {
        let d = synth_corpus(4, 10, 16, 0.05, 3).unwrap();
        assert_eq!(d.corpus.len(), 40);
        assert_eq!(d.corpus.documents().len(), 4);
        assert_eq!(d.queries.len(), 4 * 16);
        assert_eq!(d.triples.len(), 4 * 125);
        assert_eq!(d.embeddings.len(), 40 + 4 * 125 + 4 * 16);
        for t in &d.triples {
            assert_eq!(t.positive.len(), 10);
            assert_eq!(t.negative.len(), 8);
            let c = &t.query_id["train-q".len()..t.query_id.find('-').map(|_| t.query_id.rfind('-').unwrap()).unwrap()];
            assert!(t.negative.iter().all(|p| !p.starts_with(&format!("p{c}-"))));
        }
    }

    #[test]
    fn zero_noise_queries_sit_on_their_cluster() {
        let d = synth_corpus(5, 6, 12, 0.0, 4).unwrap();
        let props = d.proposition_embeddings().unwrap();
        for (qid, v) in d.query_vectors().unwrap() {
            let rel = &d.qrels.get(qid).unwrap().relevant_props;
            let mut scored: Vec<(f32, &String)> = (0..props.len())
                .map(|i| (props.row(i).iter().zip(v).map(|(a, b)| a * b).sum(), &props.ids()[i]))
                .collect();
            scored.sort_by(|a, b| b.0.total_cmp(&a.0));
            let top: BTreeSet<String> = scored[..6].iter().map(|(_, id)| (*id).clone()).collect();
            assert_eq!(&top, rel);
        }
    }
}
