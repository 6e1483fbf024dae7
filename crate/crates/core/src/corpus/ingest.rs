use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

use super::{split_sentences, CitationDetector, Corpus, Document, Sentence};
use crate::error::{Error, Result};
use crate::text::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputFormat {
    #[default]
    Jsonl,
}

#[derive(Deserialize)]
struct Record {
    id: String,
    #[serde(default)]
    title: String,
    text: Option<String>,
    sentences: Option<Vec<String>>,
}

pub fn ingest(path: &Path, format: InputFormat, detector: &CitationDetector) -> Result<Corpus> {
    let bytes = std::fs::read(path)?;
    ingest_bytes(&bytes, format, detector)
}

pub fn ingest_bytes(bytes: &[u8], format: InputFormat, detector: &CitationDetector) -> Result<Corpus> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        Error::format(format!("line {line}: invalid UTF-8"))
    })?;
    ingest_str(text, format, detector)
}

/// Parses JSONL text. Blank lines are skipped; every other line must be a
/// record with `id` and one of `sentences` (preferred) or `text`.
pub fn ingest_str(input: &str, format: InputFormat, detector: &CitationDetector) -> Result<Corpus> {
    let InputFormat::Jsonl = format;
    let lines: Vec<(usize, &str)> = input
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
        .collect();
    let documents = lines
        .par_iter()
        .map(|&(line_no, line)| parse_line(line_no, line, detector))
        .collect::<Result<Vec<_>>>()?;

    let mut seen = HashSet::with_capacity(documents.len());
    for doc in &documents {
        if !seen.insert(doc.doc_id.as_str()) {
            return Err(Error::invalid(format!("duplicate doc_id {:?}", doc.doc_id)));
        }
    }
    Corpus::new(documents)
}

fn parse_line(line_no: usize, line: &str, detector: &CitationDetector) -> Result<Document> {
    let record: Record = serde_json::from_str(line)
        .map_err(|e| Error::format(format!("line {line_no}: malformed record: {e}")))?;
    if record.id.is_empty() {
        return Err(Error::format(format!("line {line_no}: empty id")));
    }
    let raw: Vec<String> = match (record.sentences, record.text) {
        (Some(sentences), _) => sentences.iter().map(|s| normalize(s)).collect(),
        (None, Some(text)) => split_sentences(&normalize(&text)),
        (None, None) => {
            return Err(Error::format(format!(
                "line {line_no}: record needs a \"text\" or \"sentences\" field"
            )))
        }
    };
    let sentences = raw
        .iter()
        .map(|s| detector.detect(s))
        .filter(|(text, _)| !text.is_empty())
        .enumerate()
        .map(|(i, (text, cited))| Sentence { sent_idx: i as u32, text, cited, claim_score: None })
        .collect();
    Ok(Document { doc_id: record.id, title: normalize(&record.title), sentences })
}
