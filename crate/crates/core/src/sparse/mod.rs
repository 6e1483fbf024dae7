//! BM25 over an in-memory inverted index.

mod bm25;
mod store;

use std::collections::HashMap;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{sentence_unit_id, Corpus};
use crate::error::{Error, Result};
use crate::text::tokenize;

pub use bm25::{bm25_score, idf, search, search_terms, term_weight, Bm25Params};
pub use store::{SPARSE_MAGIC, SPARSE_VERSION};

/// Indexing unit: whole documents or single sentences (`doc_id#sent_idx`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    #[serde(alias = "doc")]
    Document,
    #[default]
    #[serde(alias = "sent")]
    Sentence,
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "doc" | "document" => Ok(Self::Document),
            "sent" | "sentence" => Ok(Self::Sentence),
            _ => Err(Error::invalid(format!("unknown granularity {s:?} (doc|sent)"))),
        }
    }
}

/// Splits a corpus into `(unit_id, text)` indexing units.
pub fn units(corpus: &Corpus, granularity: Granularity) -> Vec<(String, String)> {
    match granularity {
        Granularity::Document => corpus
            .documents()
            .iter()
            .map(|d| {
                let text: Vec<&str> = d.sentences.iter().map(|s| s.text.as_str()).collect();
                (d.doc_id.clone(), text.join(" "))
            })
            .collect(),
        Granularity::Sentence => corpus
            .sentences()
            .map(|(d, s)| (sentence_unit_id(&d.doc_id, s.sent_idx), s.text.clone()))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc_ord: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    /// Terms in lexical order; position is the term id.
    terms: Vec<String>,
    vocabulary: HashMap<String, u32>,
    postings: Vec<Vec<Posting>>,
    doc_len: Vec<u32>,
    doc_ids: Vec<String>,
    avgdl: f64,
}

impl InvertedIndex {
    pub fn build(corpus: &Corpus, granularity: Granularity) -> Result<Self> {
        let units = units(corpus, granularity);
        if units.is_empty() {
            return Err(Error::invalid("cannot index an empty corpus"));
        }
        Self::from_units(units)
    }

    /// Builds from explicit `(id, text)` units; ids must be unique.
    pub fn from_units(units: Vec<(String, String)>) -> Result<Self> {
        let tokenized: Vec<Vec<String>> = units.par_iter().map(|(_, text)| tokenize(text)).collect();
        let mut by_term: HashMap<&str, Vec<Posting>> = HashMap::new();
        let mut doc_len = Vec::with_capacity(units.len());
        for (ord, tokens) in tokenized.iter().enumerate() {
            let mut tf: HashMap<&str, u32> = HashMap::new();
            for t in tokens {
                *tf.entry(t.as_str()).or_default() += 1;
            }
            for (term, count) in tf {
                by_term.entry(term).or_default().push(Posting { doc_ord: ord as u32, tf: count });
            }
            doc_len.push(tokens.len() as u32);
        }
        let mut terms: Vec<&str> = by_term.keys().copied().collect();
        terms.sort_unstable();
        let postings = terms.iter().map(|t| by_term.remove(t).unwrap_or_default()).collect();
        let doc_ids = units.into_iter().map(|(id, _)| id).collect();
        Self::from_parts(terms.into_iter().map(str::to_string).collect(), postings, doc_len, doc_ids)
    }

    fn from_parts(
        terms: Vec<String>,
        postings: Vec<Vec<Posting>>,
        doc_len: Vec<u32>,
        doc_ids: Vec<String>,
    ) -> Result<Self> {
        if doc_ids.is_empty() || doc_len.len() != doc_ids.len() || terms.len() != postings.len() {
            return Err(Error::invalid("inconsistent inverted index sections"));
        }
        let mut seen = std::collections::HashSet::with_capacity(doc_ids.len());
        if let Some(dup) = doc_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::invalid(format!("duplicate unit id {dup:?}")));
        }
        if terms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("vocabulary not strictly sorted"));
        }
        let mut tf_sum = vec![0u64; doc_ids.len()];
        for list in &postings {
            if list.is_empty() {
                return Err(Error::invalid("term with empty postings"));
            }
            let mut prev: Option<u32> = None;
            for p in list {
                if prev.is_some_and(|q| p.doc_ord <= q) || p.doc_ord as usize >= doc_ids.len() || p.tf == 0 {
                    return Err(Error::invalid("postings not strictly ascending or out of range"));
                }
                tf_sum[p.doc_ord as usize] += u64::from(p.tf);
                prev = Some(p.doc_ord);
            }
        }
        if tf_sum.iter().zip(&doc_len).any(|(s, l)| *s != u64::from(*l)) {
            return Err(Error::invalid("term frequencies do not add up to document lengths"));
        }
        let avgdl = doc_len.iter().map(|&l| f64::from(l)).sum::<f64>() / doc_len.len() as f64;
        let vocabulary = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Ok(Self { terms, vocabulary, postings, doc_len, doc_ids, avgdl })
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn term_id(&self, term: &str) -> Option<u32> {
        self.vocabulary.get(term).copied()
    }

    pub fn postings(&self, term_id: u32) -> &[Posting] {
        &self.postings[term_id as usize]
    }

    pub fn doc_len(&self, doc_ord: usize) -> u32 {
        self.doc_len[doc_ord]
    }

    pub fn doc_id(&self, doc_ord: usize) -> &str {
        &self.doc_ids[doc_ord]
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    /// Term frequency of `term_id` in `doc_ord` (0 if absent).
    pub fn tf(&self, term_id: u32, doc_ord: usize) -> u32 {
        let list = self.postings(term_id);
        list.binary_search_by_key(&(doc_ord as u32), |p| p.doc_ord)
            .map_or(0, |i| list[i].tf)
    }
}
