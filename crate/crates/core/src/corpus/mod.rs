//! Sentence-level corpus: ingestion, citation detection, sentence
//! splitting and the `FDXC` store format.

mod citation;
mod ingest;
mod split;
mod store;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use citation::{detect_citation, CitationDetector};
pub use ingest::{ingest, ingest_bytes, ingest_str, InputFormat};
pub use split::split_sentences;
pub use store::{load, save, CORPUS_MAGIC, CORPUS_VERSION};

#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    /// Ordinal within the source document. Pruning keeps the original value.
    pub sent_idx: u32,
    pub text: String,
    pub cited: bool,
    pub claim_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_docs: u64,
    pub n_sentences: u64,
    /// UTF-8 bytes of all sentence texts.
    pub text_bytes: u64,
}

impl CorpusStats {
    pub fn of(documents: &[Document]) -> Self {
        let mut stats = CorpusStats { n_docs: documents.len() as u64, ..Default::default() };
        for doc in documents {
            stats.n_sentences += doc.sentences.len() as u64;
            stats.text_bytes += doc.sentences.iter().map(|s| s.text.len() as u64).sum::<u64>();
        }
        stats
    }
}

/// An immutable collection of documents plus the ids of documents that
/// pruning emptied out.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    tombstones: Vec<String>,
    stats: CorpusStats,
}

impl Corpus {
    /// Validates documents and computes stats.
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        Self::with_tombstones(documents, Vec::new())
    }

    pub fn with_tombstones(documents: Vec<Document>, tombstones: Vec<String>) -> Result<Self> {
        validate_documents(&documents)?;
        let stats = CorpusStats::of(&documents);
        Ok(Self { documents, tombstones, stats })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    /// Ids of documents dropped because no sentence survived pruning.
    pub fn tombstones(&self) -> &[String] {
        &self.tombstones
    }

    pub fn stats(&self) -> CorpusStats {
        self.stats
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Iterates `(document, sentence)` pairs in corpus order.
    pub fn sentences(&self) -> impl Iterator<Item = (&Document, &Sentence)> {
        self.documents.iter().flat_map(|d| d.sentences.iter().map(move |s| (d, s)))
    }
}

/// Id of a sentence-granularity indexing unit.
pub fn sentence_unit_id(doc_id: &str, sent_idx: u32) -> String {
    format!("{doc_id}#{sent_idx}")
}

fn validate_documents(documents: &[Document]) -> Result<()> {
    let mut seen = HashSet::with_capacity(documents.len());
    for doc in documents {
        if doc.doc_id.is_empty() {
            return Err(Error::invalid("empty doc_id"));
        }
        if !seen.insert(doc.doc_id.as_str()) {
            return Err(Error::invalid(format!("duplicate doc_id {:?}", doc.doc_id)));
        }
        let mut prev: Option<u32> = None;
        for s in &doc.sentences {
            if s.text.is_empty() {
                return Err(Error::invalid(format!("empty sentence text in {:?}", doc.doc_id)));
            }
            if prev.is_some_and(|p| s.sent_idx <= p) {
                return Err(Error::invalid(format!(
                    "sentence indices not increasing in {:?}",
                    doc.doc_id
                )));
            }
            if let Some(score) = s.claim_score {
                if !(0.0..=1.0).contains(&score) {
                    return Err(Error::invalid(format!(
                        "claim score {score} outside [0,1] in {:?}",
                        doc.doc_id
                    )));
                }
            }
            prev = Some(s.sent_idx);
        }
    }
    Ok(())
}
