use serde::{Deserialize, Serialize};

use super::InvertedIndex;
use crate::error::{Error, Result};
use crate::search::{SearchResult, TopK};
use crate::text::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self> {
        if !(k1 > 0.0 && k1.is_finite()) || !(0.0..=1.0).contains(&b) {
            return Err(Error::invalid(format!("BM25 needs k1 > 0 and b in [0,1], got k1={k1} b={b}")));
        }
        Ok(Self { k1, b })
    }
}

/// Smoothed idf, `ln(1 + (N - df + 0.5) / (df + 0.5))`, never negative.
pub fn idf(n_docs: usize, df: usize) -> f64 {
    let (n, df) = (n_docs as f64, df as f64);
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

#[inline]
pub fn term_weight(idf: f64, tf: u32, doc_len: u32, avgdl: f64, params: Bm25Params) -> f64 {
    let tf = f64::from(tf);
    let norm = 1.0 - params.b + params.b * f64::from(doc_len) / avgdl;
    idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm)
}

/// Scores one unit against a bag of query terms. Repeated terms count once
/// per occurrence.
pub fn bm25_score<S: AsRef<str>>(index: &InvertedIndex, params: Bm25Params, query_terms: &[S], doc_ord: usize) -> f64 {
    let mut score = 0.0;
    for term in query_terms {
        let Some(id) = index.term_id(term.as_ref()) else { continue };
        let tf = index.tf(id, doc_ord);
        if tf == 0 {
            continue;
        }
        let w = idf(index.n_docs(), index.postings(id).len());
        score += term_weight(w, tf, index.doc_len(doc_ord), index.avgdl(), params);
    }
    score
}

pub fn search(index: &InvertedIndex, params: Bm25Params, query: &str, k: usize) -> Vec<SearchResult> {
    search_terms(index, params, &tokenize(query), k)
}

/// Term-at-a-time evaluation with a bounded top-k heap.
pub fn search_terms<S: AsRef<str>>(index: &InvertedIndex, params: Bm25Params, terms: &[S], k: usize) -> Vec<SearchResult> {
    let mut acc = vec![0.0f64; index.n_docs()];
    let mut touched: Vec<u32> = Vec::new();
    for term in terms {
        let Some(id) = index.term_id(term.as_ref()) else { continue };
        let postings = index.postings(id);
        let w = idf(index.n_docs(), postings.len());
        for p in postings {
            let slot = &mut acc[p.doc_ord as usize];
            if *slot == 0.0 {
                touched.push(p.doc_ord);
            }
            *slot += term_weight(w, p.tf, index.doc_len(p.doc_ord as usize), index.avgdl(), params);
        }
    }
    let mut top = TopK::new(k);
    for ord in touched {
        let ord = ord as usize;
        top.push(acc[ord], index.doc_id(ord), ord);
    }
    top.into_results()
}
