//! Proposition-chunked corpus.
//!
//! A corpus file is UTF-8 JSONL where each line is either a document or a
//! proposition:
//!
//! ```text
//! {"kind":"doc","doc_id":"23","title":"Mount Everest","text":"..."}
//! {"kind":"prop","prop_id":"p1","doc_id":"23","ordinal":0,"text":"..."}
//! ```
//!
//! Lines may be interleaved freely; references are validated once the whole
//! file has been read. Proposition order in the file fixes the row order of
//! every code matrix and index built from the corpus.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposition {
    pub prop_id: String,
    pub doc_id: String,
    pub ordinal: u32,
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Line {
    Doc(Document),
    Prop(Proposition),
}

/// Validated, immutable corpus.
#[derive(Debug, Clone)]
pub struct Corpus {
    documents: Vec<Document>,
    propositions: Vec<Proposition>,
    doc_index: HashMap<String, usize>,
    prop_index: HashMap<String, usize>,
    /// Row of each proposition -> row of its parent document.
    prop_to_doc: Vec<usize>,
}

impl Corpus {
    /// Builds a corpus from parts, applying every load-time check.
    pub fn new(documents: Vec<Document>, propositions: Vec<Proposition>) -> Result<Self> {
        if propositions.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut doc_index = HashMap::with_capacity(documents.len());
        for (i, d) in documents.iter().enumerate() {
            if d.doc_id.is_empty() {
                return Err(Error::EmptyText {
                    kind: "document id of",
                    id: d.title.clone(),
                });
            }
            if d.text.is_empty() {
                return Err(Error::EmptyText {
                    kind: "document",
                    id: d.doc_id.clone(),
                });
            }
            if doc_index.insert(d.doc_id.clone(), i).is_some() {
                return Err(Error::DuplicateId {
                    kind: "document",
                    id: d.doc_id.clone(),
                });
            }
        }

        let mut prop_index = HashMap::with_capacity(propositions.len());
        let mut prop_to_doc = Vec::with_capacity(propositions.len());
        let mut ordinals: HashSet<(usize, u32)> = HashSet::with_capacity(propositions.len());
        for (i, p) in propositions.iter().enumerate() {
            if p.prop_id.is_empty() {
                return Err(Error::EmptyText {
                    kind: "proposition id of",
                    id: p.text.clone(),
                });
            }
            if p.text.is_empty() {
                return Err(Error::EmptyText {
                    kind: "proposition",
                    id: p.prop_id.clone(),
                });
            }
            if prop_index.insert(p.prop_id.clone(), i).is_some() {
                return Err(Error::DuplicateId {
                    kind: "proposition",
                    id: p.prop_id.clone(),
                });
            }
            let Some(&doc_row) = doc_index.get(&p.doc_id) else {
                return Err(Error::DanglingDocument {
                    prop_id: p.prop_id.clone(),
                    doc_id: p.doc_id.clone(),
                });
            };
            if !ordinals.insert((doc_row, p.ordinal)) {
                return Err(Error::DuplicateOrdinal {
                    doc_id: p.doc_id.clone(),
                    ordinal: p.ordinal,
                });
            }
            prop_to_doc.push(doc_row);
        }

        Ok(Corpus {
            documents,
            propositions,
            doc_index,
            prop_index,
            prop_to_doc,
        })
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut documents = Vec::new();
        let mut propositions = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line).map_err(|e| Error::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
            match parsed {
                Line::Doc(d) => documents.push(d),
                Line::Prop(p) => propositions.push(p),
            }
        }
        Corpus::new(documents, propositions)
    }

    /// Writes the canonical form: all documents, then all propositions.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let write_line = |w: &mut W, line: &Line| -> Result<()> {
            serde_json::to_writer(&mut *w, line)?;
            w.write_all(b"\n").map_err(|e| Error::io("<corpus writer>", e))
        };
        for d in &self.documents {
            write_line(&mut w, &Line::Doc(d.clone()))?;
        }
        for p in &self.propositions {
            write_line(&mut w, &Line::Prop(p.clone()))?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_jsonl(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn propositions(&self) -> &[Proposition] {
        &self.propositions
    }

    /// Number of propositions, i.e. `|Γ|`.
    pub fn len(&self) -> usize {
        self.propositions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.propositions.is_empty()
    }

    pub fn prop_ids(&self) -> impl Iterator<Item = &str> {
        self.propositions.iter().map(|p| p.prop_id.as_str())
    }

    pub fn prop_row(&self, prop_id: &str) -> Result<usize> {
        self.prop_index
            .get(prop_id)
            .copied()
            .ok_or_else(|| Error::UnknownProposition(prop_id.to_string()))
    }

    pub fn proposition(&self, prop_id: &str) -> Result<&Proposition> {
        self.prop_row(prop_id).map(|i| &self.propositions[i])
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.doc_index.get(doc_id).map(|&i| &self.documents[i])
    }

    /// Parent document of the proposition at `row`.
    pub fn parent_of_row(&self, row: usize) -> &Document {
        &self.documents[self.prop_to_doc[row]]
    }

    /// `prop_id -> doc_id` for every proposition, in corpus order.
    pub fn prop_to_doc(&self) -> impl Iterator<Item = (&str, &str)> {
        self.propositions
            .iter()
            .map(|p| (p.prop_id.as_str(), p.doc_id.as_str()))
    }

    /// Parent documents of `prop_ids`, deduplicated in first-occurrence order.
    pub fn docs_of<S: AsRef<str>>(&self, prop_ids: &[S]) -> Result<Vec<String>> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for id in prop_ids {
            let row = self.prop_row(id.as_ref())?;
            let doc_row = self.prop_to_doc[row];
            if seen.insert(doc_row) {
                out.push(self.documents[doc_row].doc_id.clone());
            }
        }
        Ok(out)
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Corpus::from_reader(BufReader::new(file))
}
