//! Chunk-to-context prompt assembly.
//!
//! Retrieved propositions are mapped back to their parent documents, the
//! first `k_docs` distinct parents are kept, and the generator prompt is
//! rendered with three blocks: an instruction, the retrieved segments (each
//! tagged with its parent's id), and the indexed documents.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub const DEFAULT_INSTRUCTION: &str = "Read every retrieved segment below and answer the question \
briefly and accurately. Where a segment is not enough on its own, consult the indexed document \
with the same ID. Reply with just a few words:";

/// `alpha_mix · doc_score + (1 − alpha_mix) · Σ_k w_k · x_k`.
pub fn hybrid_score(
    doc_score: f64,
    prop_scores: &[f64],
    weights: &[f64],
    alpha_mix: f64,
) -> Result<f64> {
    if prop_scores.len() != weights.len() {
        return Err(Error::Shape(format!(
            "{} proposition scores for {} weights",
            prop_scores.len(),
            weights.len()
        )));
    }
    if !(0.0..=1.0).contains(&alpha_mix) {
        return Err(Error::Config(format!("alpha_mix = {alpha_mix} outside [0, 1]")));
    }
    if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::Config("weights must be non-negative".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("weights sum to {sum}, not 1")));
    }
    let blended: f64 = prop_scores.iter().zip(weights).map(|(x, w)| x * w).sum();
    Ok(alpha_mix * doc_score + (1.0 - alpha_mix) * blended)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredProposition {
    pub prop_id: String,
    pub doc_id: String,
    /// Per-query min-max normalized retrieval score.
    pub prop_score: f64,
    pub final_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub idx_id: String,
    pub title: String,
    pub text: String,
    pub prop_id: String,
    pub final_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedDocument {
    pub id: String,
    pub title: String,
    pub text: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub additional_prompt: String,
    pub retrieved_segments: Vec<Segment>,
    pub indexed_documents: Vec<IndexedDocument>,
    pub question: String,
}

impl PromptBundle {
    pub fn with_question(mut self, question: impl Into<String>) -> Self {
        self.question = question.into();
        self
    }

    /// Checks that every segment points at an indexed document.
    pub fn validate(&self) -> Result<()> {
        if self.retrieved_segments.is_empty() {
            return Err(Error::EmptyRetrieval("no retrieved segments".into()));
        }
        let ids: HashSet<&str> = self.indexed_documents.iter().map(|d| d.id.as_str()).collect();
        if let Some(s) = self
            .retrieved_segments
            .iter()
            .find(|s| !ids.contains(s.idx_id.as_str()))
        {
            return Err(Error::Shape(format!(
                "segment {:?} references document {:?} which is not indexed",
                s.prop_id, s.idx_id
            )));
        }
        Ok(())
    }
}

/// Keeps the first `k_docs` distinct parents of `ranked_props` and the
/// propositions that belong to them, both in rank order. Scores are unset
/// (zero) until [`apply_hybrid_scores`].
pub fn assemble_context<S: AsRef<str>>(
    corpus: &Corpus,
    ranked_props: &[S],
    k_docs: usize,
) -> Result<PromptBundle> {
    if k_docs == 0 {
        return Err(Error::Config("k_docs must be at least 1".into()));
    }
    let doc_ids = corpus.docs_of(ranked_props)?;
    let kept: Vec<&str> = doc_ids.iter().take(k_docs).map(String::as_str).collect();
    let kept_set: HashSet<&str> = kept.iter().copied().collect();

    let mut segments = Vec::new();
    for id in ranked_props {
        let prop = corpus.proposition(id.as_ref())?;
        if !kept_set.contains(prop.doc_id.as_str()) {
            continue;
        }
        let doc = corpus.document(&prop.doc_id).expect("validated corpus");
        segments.push(Segment {
            idx_id: doc.doc_id.clone(),
            title: doc.title.clone(),
            text: prop.text.clone(),
            prop_id: prop.prop_id.clone(),
            final_score: 0.0,
        });
    }
    let documents = kept
        .iter()
        .map(|&id| {
            let d = corpus.document(id).expect("validated corpus");
            IndexedDocument {
                id: d.doc_id.clone(),
                title: d.title.clone(),
                text: d.text.clone(),
                score: 0.0,
            }
        })
        .collect();
    Ok(PromptBundle {
        additional_prompt: DEFAULT_INSTRUCTION.to_string(),
        retrieved_segments: segments,
        indexed_documents: documents,
        question: String::new(),
    })
}

/// Min-max normalizes `raw` to `[0, 1]`; a constant list maps to all ones.
pub fn normalize_scores(raw: &[f64]) -> Vec<f64> {
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![1.0; raw.len()];
    }
    raw.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

/// Scores segments and documents, then orders segments by final score
/// (descending, stable on rank).
///
/// `raw_scores` maps prop ids to their retrieval scores over the whole
/// ranked list, which fixes the normalization range. A document's level
/// score is the best normalized score among its propositions; its final
/// score blends that with the uniform mean of its propositions. A
/// segment's final score blends its parent's level score with its own.
pub fn apply_hybrid_scores(
    bundle: &mut PromptBundle,
    raw_scores: &[(String, f64)],
    alpha_mix: f64,
) -> Result<Vec<ScoredProposition>> {
    let normalized = normalize_scores(&raw_scores.iter().map(|(_, s)| *s).collect::<Vec<_>>());
    let by_prop: HashMap<&str, f64> = raw_scores
        .iter()
        .zip(&normalized)
        .map(|((id, _), &x)| (id.as_str(), x))
        .collect();

    let mut children: HashMap<String, Vec<f64>> = HashMap::new();
    for seg in &bundle.retrieved_segments {
        let x = *by_prop
            .get(seg.prop_id.as_str())
            .ok_or_else(|| Error::UnknownProposition(seg.prop_id.clone()))?;
        children.entry(seg.idx_id.clone()).or_default().push(x);
    }
    let level: HashMap<String, f64> = children
        .iter()
        .map(|(d, xs)| (d.clone(), xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)))
        .collect();

    let mut doc_scores = HashMap::new();
    for (d, xs) in &children {
        let w = vec![1.0 / xs.len() as f64; xs.len()];
        doc_scores.insert(d.clone(), hybrid_score(level[d], xs, &w, alpha_mix)?);
    }

    let mut scored = Vec::with_capacity(bundle.retrieved_segments.len());
    for seg in &mut bundle.retrieved_segments {
        let x = by_prop[seg.prop_id.as_str()];
        seg.final_score = hybrid_score(level[&seg.idx_id], &[x], &[1.0], alpha_mix)?;
        scored.push(ScoredProposition {
            prop_id: seg.prop_id.clone(),
            doc_id: seg.idx_id.clone(),
            prop_score: x,
            final_score: seg.final_score,
        });
    }
    for doc in &mut bundle.indexed_documents {
        doc.score = doc_scores.get(&doc.id).copied().unwrap_or(0.0);
    }
    bundle
        .retrieved_segments
        .sort_by(|a, b| b.final_score.total_cmp(&a.final_score));
    Ok(scored)
}

/// A prompt template with `{ADDITIONAL_PROMPT}`, `{SEGMENTS}`,
/// `{DOCUMENTS}` and `{QUESTION}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: String,
    pub text: String,
}

impl PromptTemplate {
    pub fn open_domain_qa() -> Self {
        PromptTemplate {
            name: "open-domain-qa".into(),
            text: include_str!("../templates/open_domain_qa.txt").into(),
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "open-domain-qa" => Some(Self::open_domain_qa()),
            _ => None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(PromptTemplate {
            name: path.display().to_string(),
            text,
        })
    }
}

fn segments_block(bundle: &PromptBundle) -> String {
    let mut out = String::new();
    for s in &bundle.retrieved_segments {
        let _ = write!(out, "IdxID:{} Title: {}\nPropositions: {}\n\n", s.idx_id, s.title, s.text);
    }
    out
}

fn documents_block(bundle: &PromptBundle) -> String {
    let mut out = String::new();
    for d in &bundle.indexed_documents {
        let _ = write!(out, "ID={} Title: {}\nDoc: {}\n\n", d.id, d.title, d.text);
    }
    out
}

/// Renders `bundle` through `template` in one pass, so placeholder-like text
/// inside documents is never expanded.
pub fn render_prompt(bundle: &PromptBundle, template: &PromptTemplate) -> Result<String> {
    bundle.validate()?;
    let mut out = String::with_capacity(template.text.len() + 1024);
    let mut rest = template.text.as_str();
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find('}');
        let name = close.map(|c| &after[..c]);
        let is_placeholder = name.is_some_and(|n| {
            !n.is_empty() && n.chars().all(|c| c.is_ascii_uppercase() || c == '_')
        });
        if !is_placeholder {
            out.push('{');
            rest = after;
            continue;
        }
        let name = name.unwrap();
        match name {
            "ADDITIONAL_PROMPT" => out.push_str(&bundle.additional_prompt),
            "SEGMENTS" => out.push_str(&segments_block(bundle)),
            "DOCUMENTS" => out.push_str(&documents_block(bundle)),
            "QUESTION" => out.push_str(&bundle.question),
            other => return Err(Error::UnresolvedPlaceholder(format!("{{{other}}}"))),
        }
        rest = &after[name.len() + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Proposition};

    fn corpus() -> Corpus {
        let docs = ["d1", "d2", "d3"]
            .iter()
            .map(|&d| Document {
                doc_id: d.into(),
                title: format!("T{d}"),
                text: format!("Body {d}."),
            })
            .collect();
        let props = [("a", "d1", 0), ("b", "d1", 1), ("c", "d2", 0), ("e", "d3", 0)]
            .iter()
            .map(|&(p, d, o)| Proposition {
                prop_id: p.into(),
                doc_id: d.into(),
                ordinal: o,
                text: format!("Fact {p}."),
            })
            .collect();
        Corpus::new(docs, props).unwrap()
    }

    #[test]
    fn hybrid_boundaries() {
        assert_eq!(hybrid_score(0.37, &[0.9], &[1.0], 1.0).unwrap(), 0.37);
        assert_eq!(hybrid_score(0.37, &[0.9], &[1.0], 0.0).unwrap(), 0.9);
        let v = hybrid_score(0.8, &[0.6, 0.2], &[0.5, 0.5], 0.5).unwrap();
        assert!((v - 0.6).abs() < 1e-12);
    }

    #[test]
    fn hybrid_errors() {
        assert!(matches!(hybrid_score(0.5, &[0.1], &[0.5, 0.5], 0.5), Err(Error::Shape(_))));
        assert!(hybrid_score(0.5, &[0.1, 0.2], &[0.5, 0.6], 0.5).is_err());
        assert!(hybrid_score(0.5, &[0.1, 0.2], &[0.5, 0.5 + 1e-10], 0.5).is_ok());
    }

    #[test]
    fn dedup_and_truncate() {
        let c = corpus();
        let b = assemble_context(&c, &["a", "b", "c", "e"], 2).unwrap();
        let ids: Vec<_> = b.indexed_documents.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["d1", "d2"]);
        let segs: Vec<_> = b.retrieved_segments.iter().map(|s| s.prop_id.as_str()).collect();
        assert_eq!(segs, ["a", "b", "c"]);
    }

    #[test]
    fn single_parent_and_saturation() {
        let c = corpus();
        assert_eq!(assemble_context(&c, &["b", "a"], 5).unwrap().indexed_documents.len(), 1);
        assert_eq!(assemble_context(&c, &["e", "c", "a"], 10).unwrap().indexed_documents.len(), 3);
        assert!(assemble_context(&c, &["zz"], 1).is_err());
    }

    #[test]
    fn empty_segments_rejected() {
        let c = corpus();
        let b = assemble_context::<&str>(&c, &[], 3).unwrap();
        assert!(matches!(
            render_prompt(&b, &PromptTemplate::open_domain_qa()),
            Err(Error::EmptyRetrieval(_))
        ));
    }

    #[test]
    fn unknown_placeholder_rejected_but_braces_in_data_pass() {
        let c = corpus();
        let mut b = assemble_context(&c, &["a"], 1).unwrap().with_question("What is {QUESTION}?");
        b.additional_prompt = "{not a placeholder}".into();
        let t = PromptTemplate {
            name: "x".into(),
            text: "{ADDITIONAL_PROMPT}|{QUESTION}|{json: 1}".into(),
        };
        assert_eq!(
            render_prompt(&b, &t).unwrap(),
            "{not a placeholder}|What is {QUESTION}?|{json: 1}"
        );
        let bad = PromptTemplate {
            name: "x".into(),
            text: "{CONTEXT}".into(),
        };
        assert!(matches!(render_prompt(&b, &bad), Err(Error::UnresolvedPlaceholder(_))));
    }

    #[test]
    fn hybrid_scores_order_segments() {
        let c = corpus();
        let mut b = assemble_context(&c, &["a", "c", "b"], 2).unwrap();
        let raw = vec![("a".to_string(), 10.0), ("c".to_string(), 8.0), ("b".to_string(), 2.0)];
        let scored = apply_hybrid_scores(&mut b, &raw, 0.5).unwrap();
        assert_eq!(scored.len(), 3);
        // normalized: a=1, c=0.75, b=0; d1 level 1, d2 level 0.75
        let order: Vec<_> = b.retrieved_segments.iter().map(|s| s.prop_id.as_str()).collect();
        assert_eq!(order, ["a", "c", "b"]);
        assert!((b.retrieved_segments[2].final_score - 0.5).abs() < 1e-12);
        assert!((b.indexed_documents[0].score - 0.75).abs() < 1e-12);
    }
}
