use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{Qrels, RunFile};
use crate::error::{Error, Result};

/// A metric averaged over judged queries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricValue {
    pub value: f64,
    pub n_queries: usize,
    /// Queries dropped because they have no relevant documents.
    pub excluded: usize,
}

fn per_query<F>(run: &RunFile, qrels: &Qrels, mut f: F) -> Result<MetricValue>
where
    F: FnMut(&[crate::SearchResult], &BTreeSet<String>) -> f64,
{
    if let Some((qid, _)) = run.iter().find(|(q, _)| qrels.relevant(q).is_none()) {
        return Err(Error::invalid(format!("run query {qid:?} has no judgments")));
    }
    let (mut sum, mut n, mut excluded) = (0.0, 0usize, 0usize);
    for (qid, relevant) in qrels.iter() {
        if relevant.is_empty() {
            excluded += 1;
            continue;
        }
        sum += f(run.get(qid).unwrap_or(&[]), relevant);
        n += 1;
    }
    let value = if n == 0 { 0.0 } else { sum / n as f64 };
    Ok(MetricValue { value, n_queries: n, excluded })
}

/// Mean fraction of each query's relevant documents found in its top `k`.
pub fn recall_at_k(run: &RunFile, qrels: &Qrels, k: usize) -> Result<MetricValue> {
    per_query(run, qrels, |results, relevant| {
        let hits = results.iter().take(k).filter(|r| relevant.contains(&r.doc_id)).count();
        hits as f64 / relevant.len() as f64
    })
}

/// Binary-gain nDCG with a `log2(rank + 1)` discount.
pub fn ndcg_at_k(run: &RunFile, qrels: &Qrels, k: usize) -> Result<MetricValue> {
    let discount = |rank: usize| 1.0 / ((rank + 1) as f64).log2();
    per_query(run, qrels, |results, relevant| {
        let dcg: f64 = results
            .iter()
            .take(k)
            .enumerate()
            .filter(|(_, r)| relevant.contains(&r.doc_id))
            .map(|(i, _)| discount(i + 1))
            .sum();
        let ideal: f64 = (1..=relevant.len().min(k)).map(discount).sum();
        if ideal == 0.0 {
            0.0
        } else {
            dcg / ideal
        }
    })
}

/// Per-class F1 averaged with gold-label support as weights.
pub fn weighted_f1(predictions: &BTreeMap<String, String>, gold: &BTreeMap<String, String>) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::invalid("weighted F1 of an empty label set"));
    }
    if predictions.len() != gold.len() || !predictions.keys().eq(gold.keys()) {
        return Err(Error::invalid("prediction and gold ids differ"));
    }
    let mut tp: BTreeMap<&str, usize> = BTreeMap::new();
    let mut fp: BTreeMap<&str, usize> = BTreeMap::new();
    let mut support: BTreeMap<&str, usize> = BTreeMap::new();
    for (id, g) in gold {
        let p = &predictions[id];
        *support.entry(g).or_default() += 1;
        if p == g {
            *tp.entry(g).or_default() += 1;
        } else {
            *fp.entry(p).or_default() += 1;
        }
    }
    let total = gold.len() as f64;
    let mut score = 0.0;
    for (&class, &sup) in &support {
        let t = tp.get(class).copied().unwrap_or(0) as f64;
        let f_pos = fp.get(class).copied().unwrap_or(0) as f64;
        let f_neg = sup as f64 - t;
        let f1 = if t == 0.0 { 0.0 } else { 2.0 * t / (2.0 * t + f_pos + f_neg) };
        score += f1 * sup as f64 / total;
    }
    Ok(score)
}
