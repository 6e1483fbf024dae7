//! Corpus pruning: Fact Extraction (claim-score threshold), Citation
//! Extraction (cited sentences only) and their Fusion.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusStats, Document, Sentence};
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PruneMethod {
    #[serde(rename = "FE")]
    FactExtraction,
    #[serde(rename = "CE")]
    CitationExtraction,
    #[serde(rename = "Fu")]
    Fusion,
}

impl FromStr for PruneMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fe" => Ok(Self::FactExtraction),
            "ce" => Ok(Self::CitationExtraction),
            "fu" => Ok(Self::Fusion),
            _ => Err(Error::invalid(format!("unknown prune method {s:?} (fe|ce|fu)"))),
        }
    }
}

impl fmt::Display for PruneMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::FactExtraction => "FE",
            Self::CitationExtraction => "CE",
            Self::Fusion => "Fu",
        })
    }
}

/// External claim-detector output keyed by `(doc_id, sent_idx)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClaimScoreTable {
    scores: HashMap<(String, u32), f64>,
}

impl ClaimScoreTable {
    pub fn insert(&mut self, doc_id: impl Into<String>, sent_idx: u32, score: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::invalid(format!("claim score {score} outside [0,1]")));
        }
        self.scores.insert((doc_id.into(), sent_idx), score);
        Ok(())
    }

    pub fn get(&self, doc_id: &str, sent_idx: u32) -> Option<f64> {
        self.scores.get(&(doc_id.to_string(), sent_idx)).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Parses `doc_id \t sent_idx \t score` lines. Blank lines are skipped.
    pub fn parse_tsv(input: &str) -> Result<Self> {
        let mut table = Self::default();
        for (i, line) in input.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [doc_id, idx, score] = fields[..] else {
                return Err(Error::format(format!("score file line {}: expected 3 tab-separated fields", i + 1)));
            };
            let idx: u32 = idx
                .trim()
                .parse()
                .map_err(|_| Error::format(format!("score file line {}: bad sent_idx {idx:?}", i + 1)))?;
            let score: f64 = score
                .trim()
                .parse()
                .map_err(|_| Error::format(format!("score file line {}: bad score {score:?}", i + 1)))?;
            table
                .insert(doc_id, idx, score)
                .map_err(|e| Error::format(format!("score file line {}: {e}", i + 1)))?;
        }
        Ok(table)
    }
}

/// Where Fact Extraction takes sentence scores from.
#[derive(Debug, Clone, Copy)]
pub enum ScoreSource<'a> {
    /// Only the built-in heuristic.
    Heuristic,
    /// Table first, then any score stored on the sentence; with `fallback`
    /// the heuristic fills remaining gaps, otherwise a gap is an error.
    Table { table: &'a ClaimScoreTable, fallback: bool },
}

const MONTHS: [&str; 12] = [
    "january", "february", "march", "april", "may", "june", "july", "august", "september",
    "october", "november", "december",
];

/// Deterministic check-worthiness proxy in tenths:
/// digit +0.4, capitalized non-initial token +0.3, at least six tokens +0.2,
/// month name or four-digit year +0.1, capped at 1.0. Tokens are the
/// alphanumeric runs the index tokenizer produces, so "2.1" counts as two.
pub fn heuristic_claim_score(sentence: &Sentence) -> f64 {
    let text = &sentence.text;
    let tokens: Vec<&str> = text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).collect();
    let mut tenths = 0u32;
    if text.chars().any(|c| c.is_ascii_digit()) {
        tenths += 4;
    }
    if tokens.iter().skip(1).any(|t| t.chars().next().is_some_and(char::is_uppercase)) {
        tenths += 3;
    }
    if tokens.len() >= 6 {
        tenths += 2;
    }
    let dated = tokens.iter().any(|t| {
        (t.len() == 4 && t.bytes().all(|b| b.is_ascii_digit())) || MONTHS.contains(&t.to_lowercase().as_str())
    });
    if dated {
        tenths += 1;
    }
    f64::from(tenths.min(10)) / 10.0
}

fn score_of(doc: &Document, s: &Sentence, source: ScoreSource<'_>) -> Result<f64> {
    match source {
        ScoreSource::Heuristic => Ok(heuristic_claim_score(s)),
        ScoreSource::Table { table, fallback } => table
            .get(&doc.doc_id, s.sent_idx)
            .or(s.claim_score)
            .or_else(|| fallback.then(|| heuristic_claim_score(s)))
            .ok_or_else(|| {
                Error::invalid(format!(
                    "no claim score for ({}, {}) and heuristic fallback is disabled",
                    doc.doc_id, s.sent_idx
                ))
            }),
    }
}

// Keeps sentences where `keep` holds; emptied documents become tombstones.
fn retain<F>(corpus: &Corpus, mut keep: F) -> Result<Corpus>
where
    F: FnMut(&Document, &Sentence) -> Result<bool>,
{
    let mut documents = Vec::new();
    let mut tombstones = corpus.tombstones().to_vec();
    for doc in corpus.documents() {
        let mut sentences = Vec::new();
        for s in &doc.sentences {
            if keep(doc, s)? {
                sentences.push(s.clone());
            }
        }
        if sentences.is_empty() {
            tombstones.push(doc.doc_id.clone());
        } else {
            documents.push(Document { doc_id: doc.doc_id.clone(), title: doc.title.clone(), sentences });
        }
    }
    Corpus::with_tombstones(documents, tombstones)
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid(format!("threshold {threshold} outside [0,1]")));
    }
    Ok(())
}

/// Keeps sentences scoring at least `threshold`.
pub fn fact_extract(corpus: &Corpus, scores: ScoreSource<'_>, threshold: f64) -> Result<Corpus> {
    check_threshold(threshold)?;
    retain(corpus, |d, s| Ok(score_of(d, s, scores)? >= threshold))
}

/// Keeps sentences that carried a citation marker.
pub fn citation_extract(corpus: &Corpus) -> Corpus {
    retain(corpus, |_, s| Ok(s.cited)).expect("subset of a valid corpus is valid")
}

/// Union of Fact Extraction and Citation Extraction.
pub fn fuse(corpus: &Corpus, scores: ScoreSource<'_>, threshold: f64) -> Result<Corpus> {
    check_threshold(threshold)?;
    retain(corpus, |d, s| Ok(s.cited || score_of(d, s, scores)? >= threshold))
}

pub fn prune(corpus: &Corpus, method: PruneMethod, scores: ScoreSource<'_>, threshold: f64) -> Result<Corpus> {
    match method {
        PruneMethod::FactExtraction => fact_extract(corpus, scores, threshold),
        PruneMethod::CitationExtraction => Ok(citation_extract(corpus)),
        PruneMethod::Fusion => fuse(corpus, scores, threshold),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub method: PruneMethod,
    pub before: CorpusStats,
    pub after: CorpusStats,
    pub size_reduction_pct: f64,
    pub sentence_reduction_pct: f64,
}

pub fn report(before: &Corpus, after: &Corpus, method: PruneMethod) -> Result<PruneReport> {
    let (b, a) = (before.stats(), after.stats());
    if b.text_bytes == 0 {
        return Err(Error::invalid("cannot report reduction for a corpus with no text"));
    }
    if a.n_sentences > b.n_sentences || a.text_bytes > b.text_bytes {
        return Err(Error::invalid("pruned corpus is larger than its source"));
    }
    let pct = |after: u64, before: u64| 100.0 * (1.0 - after as f64 / before as f64);
    Ok(PruneReport {
        method,
        before: b,
        after: a,
        size_reduction_pct: pct(a.text_bytes, b.text_bytes),
        sentence_reduction_pct: pct(a.n_sentences, b.n_sentences),
    })
}

/// `(doc_id, sent_idx)` keys of every sentence, for set comparisons.
pub fn sentence_keys(corpus: &Corpus) -> HashSet<(String, u32)> {
    corpus.sentences().map(|(d, s)| (d.doc_id.clone(), s.sent_idx)).collect()
}
