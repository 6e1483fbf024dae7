use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use crate::dense::{Negatives, TrainPair};
use crate::error::{Error, Result};
use crate::search::{rank_cmp, SearchResult};

/// Binary relevance judgments. A query whose judgments are all
/// non-positive is kept with an empty set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judged: BTreeMap<String, BTreeSet<String>>,
    /// Non-positive judgments, kept so `to_trec` loses no query.
    negative: BTreeMap<String, BTreeSet<String>>,
}

impl Qrels {
    pub fn insert(&mut self, qid: impl Into<String>, doc_id: impl Into<String>, relevant: bool) -> Result<()> {
        let qid = qid.into();
        if qid.is_empty() {
            return Err(Error::invalid("empty qid"));
        }
        let set = self.judged.entry(qid.clone()).or_default();
        if relevant {
            set.insert(doc_id.into());
        } else {
            self.negative.entry(qid).or_default().insert(doc_id.into());
        }
        Ok(())
    }

    pub fn relevant(&self, qid: &str) -> Option<&BTreeSet<String>> {
        self.judged.get(qid)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeSet<String>)> {
        self.judged.iter()
    }

    pub fn len(&self) -> usize {
        self.judged.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judged.is_empty()
    }

    /// `qid 0 doc_id rel`, whitespace separated.
    pub fn parse(input: &str) -> Result<Self> {
        let mut q = Self::default();
        for (i, line) in input.lines().enumerate() {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            let [qid, _, doc, rel] = f[..] else {
                return Err(Error::format(format!("qrels line {}: expected 4 fields", i + 1)));
            };
            let rel: i64 =
                rel.parse().map_err(|_| Error::format(format!("qrels line {}: bad relevance {rel:?}", i + 1)))?;
            q.insert(qid, doc, rel > 0)?;
        }
        Ok(q)
    }

    pub fn to_trec(&self) -> String {
        let mut out = String::new();
        for (qid, docs) in &self.judged {
            for d in docs {
                let _ = writeln!(out, "{qid} 0 {d} 1");
            }
            for d in self.negative.get(qid).into_iter().flatten() {
                let _ = writeln!(out, "{qid} 0 {d} 0");
            }
        }
        out
    }
}

/// Ranked results per query, kept sorted by score desc then id asc.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunFile {
    runs: BTreeMap<String, Vec<SearchResult>>,
}

impl RunFile {
    pub fn insert(&mut self, qid: impl Into<String>, mut results: Vec<SearchResult>) -> Result<()> {
        let qid = qid.into();
        let mut seen = HashSet::with_capacity(results.len());
        if let Some(dup) = results.iter().find(|r| !seen.insert(r.doc_id.as_str())) {
            return Err(Error::invalid(format!("duplicate doc {:?} for query {qid:?}", dup.doc_id)));
        }
        results.sort_by(|a, b| rank_cmp(a.score, &a.doc_id, b.score, &b.doc_id));
        self.runs.insert(qid, results);
        Ok(())
    }

    pub fn get(&self, qid: &str) -> Option<&[SearchResult]> {
        self.runs.get(qid).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<SearchResult>)> {
        self.runs.iter()
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// `qid Q0 doc_id rank score tag`. Ranks are recomputed from scores.
    pub fn parse(input: &str) -> Result<Self> {
        let mut grouped: BTreeMap<String, Vec<SearchResult>> = BTreeMap::new();
        for (i, line) in input.lines().enumerate() {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            let [qid, _, doc, _rank, score, _tag] = f[..] else {
                return Err(Error::format(format!("run line {}: expected 6 fields", i + 1)));
            };
            let score: f64 = score
                .parse()
                .ok()
                .filter(|s: &f64| s.is_finite())
                .ok_or_else(|| Error::format(format!("run line {}: bad score {score:?}", i + 1)))?;
            grouped.entry(qid.to_string()).or_default().push(SearchResult { doc_id: doc.to_string(), score });
        }
        let mut run = Self::default();
        for (qid, results) in grouped {
            run.insert(qid, results).map_err(|e| Error::format(e.to_string()))?;
        }
        Ok(run)
    }

    pub fn to_trec(&self, tag: &str) -> String {
        let mut out = String::new();
        for (qid, results) in &self.runs {
            for (rank, r) in results.iter().enumerate() {
                let _ = writeln!(out, "{qid} Q0 {} {} {} {tag}", r.doc_id, rank + 1, r.score);
            }
        }
        out
    }
}

fn tsv_pairs(input: &str, what: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('\t') else {
            return Err(Error::format(format!("{what} line {}: expected a tab-separated pair", i + 1)));
        };
        if key.is_empty() {
            return Err(Error::format(format!("{what} line {}: empty id", i + 1)));
        }
        out.push((key.to_string(), value.to_string()));
    }
    Ok(out)
}

/// `qid \t query text`, order preserved. Duplicate qids are rejected.
pub fn parse_queries(input: &str) -> Result<Vec<(String, String)>> {
    let queries = tsv_pairs(input, "query file")?;
    let mut seen = HashSet::new();
    if let Some((dup, _)) = queries.iter().find(|(q, _)| !seen.insert(q.as_str())) {
        return Err(Error::format(format!("duplicate qid {dup:?} in query file")));
    }
    Ok(queries)
}

/// `id \t label` for weighted F1.
pub fn parse_labels(input: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (id, label) in tsv_pairs(input, "label file")? {
        if out.insert(id.clone(), label.trim().to_string()).is_some() {
            return Err(Error::format(format!("duplicate id {id:?} in label file")));
        }
    }
    Ok(out)
}

/// `qid \t positive_id [\t neg1,neg2,...]`; `query_ids` maps qids to rows
/// of the query embedding matrix. Without a negatives column negatives are
/// mined.
pub fn parse_pairs(input: &str, query_ids: &[String]) -> Result<Vec<TrainPair>> {
    let rows: std::collections::HashMap<&str, usize> =
        query_ids.iter().enumerate().map(|(i, q)| (q.as_str(), i)).collect();
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let (qid, pos, negs) = match f[..] {
            [q, p] => (q, p, None),
            [q, p, n] => (q, p, Some(n)),
            _ => return Err(Error::format(format!("pairs line {}: expected 2 or 3 fields", i + 1))),
        };
        let query_row = *rows
            .get(qid)
            .ok_or_else(|| Error::format(format!("pairs line {}: unknown qid {qid:?}", i + 1)))?;
        let negatives = match negs.map(str::trim) {
            None | Some("") => Negatives::Mine,
            Some(list) => Negatives::Fixed(list.split(',').map(|s| s.trim().to_string()).collect()),
        };
        out.push(TrainPair { query_row, positive_id: pos.trim().to_string(), negatives });
    }
    Ok(out)
}
