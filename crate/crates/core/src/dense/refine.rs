//! Ranking-supervised centroid refinement.
//!
//! Query embeddings are fixed; only centroid entries move. Each step
//! lowers the pairwise logistic loss `ln(1 + exp(s(q,d-) - s(q,d+)))`
//! between a judged positive and hard negatives mined from the index
//! being trained.

use std::collections::{HashMap, HashSet};

use super::index::CompressedIndex;
use super::pq::encode;
use super::EmbeddingMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Negatives {
    /// Top-n by current approximate score, excluding the query's positives.
    Mine,
    Fixed(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainPair {
    pub query_row: usize,
    pub positive_id: String,
    pub negatives: Negatives,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineParams {
    pub epochs: usize,
    pub lr: f32,
    pub n_hard_negatives: usize,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self { epochs: 5, lr: 0.05, n_hard_negatives: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RefineTrace {
    /// Mean loss of the input index with freshly mined negatives.
    pub initial_loss: f64,
    /// Mean pre-step loss over each epoch.
    pub epoch_loss: Vec<f64>,
    /// Mean loss of the returned index with freshly mined negatives.
    pub final_loss: f64,
}

/// `ln(1 + exp(neg - pos))`, computed without overflow.
pub fn pairwise_logistic_loss(pos: f64, neg: f64) -> f64 {
    let x = neg - pos;
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct Prepared {
    /// Padded, rotated query per pair.
    queries: Vec<Vec<f32>>,
    positive: Vec<usize>,
    fixed: Vec<Option<Vec<usize>>>,
    /// All positive ordinals of each pair's query row.
    judged: Vec<HashSet<usize>>,
}

fn prepare(index: &CompressedIndex, queries: &EmbeddingMatrix, pairs: &[TrainPair]) -> Result<Prepared> {
    let ord: HashMap<&str, usize> = index.ids().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let lookup = |id: &str| {
        ord.get(id).copied().ok_or_else(|| Error::invalid(format!("training id {id:?} not in index")))
    };
    let mut by_row: HashMap<usize, HashSet<usize>> = HashMap::new();
    let mut p = Prepared { queries: Vec::new(), positive: Vec::new(), fixed: Vec::new(), judged: Vec::new() };
    for pair in pairs {
        if pair.query_row >= queries.n() {
            return Err(Error::invalid(format!("query row {} out of range", pair.query_row)));
        }
        p.queries.push(index.prepare_query(queries.row(pair.query_row))?);
        let pos = lookup(&pair.positive_id)?;
        p.positive.push(pos);
        by_row.entry(pair.query_row).or_default().insert(pos);
        p.fixed.push(match &pair.negatives {
            Negatives::Mine => None,
            Negatives::Fixed(ids) => Some(ids.iter().map(|id| lookup(id)).collect::<Result<_>>()?),
        });
    }
    p.judged = pairs.iter().map(|pair| by_row[&pair.query_row].clone()).collect();
    Ok(p)
}

fn mine(index: &CompressedIndex, p: &Prepared, n_hard: usize) -> Vec<Vec<usize>> {
    (0..p.positive.len())
        .map(|i| match &p.fixed[i] {
            Some(fixed) => fixed.clone(),
            None => {
                let lut = index.lookup_table(&p.queries[i]);
                let judged = &p.judged[i];
                index.scan_ords(&lut, n_hard, |d| judged.contains(&d))
            }
        })
        .collect()
}

fn pair_loss(index: &CompressedIndex, q: &[f32], pos: usize, negs: &[usize]) -> Option<f64> {
    if negs.is_empty() {
        return None;
    }
    let lut = index.lookup_table(q);
    let sp = f64::from(index.score_code(&lut, pos));
    let total: f64 = negs.iter().map(|&n| pairwise_logistic_loss(sp, f64::from(index.score_code(&lut, n)))).sum();
    Some(total / negs.len() as f64)
}

fn mean_loss(index: &CompressedIndex, p: &Prepared, n_hard: usize) -> f64 {
    let negs = mine(index, p, n_hard);
    let losses: Vec<f64> =
        (0..p.positive.len()).filter_map(|i| pair_loss(index, &p.queries[i], p.positive[i], &negs[i])).collect();
    if losses.is_empty() {
        0.0
    } else {
        losses.iter().sum::<f64>() / losses.len() as f64
    }
}

/// One gradient step on a single pair. Returns the pre-step loss.
fn step(index: &mut CompressedIndex, q: &[f32], pos: usize, negs: &[usize], lr: f32) -> Option<f64> {
    if negs.is_empty() {
        return None;
    }
    let lut = index.lookup_table(q);
    let sp = f64::from(index.score_code(&lut, pos));
    let inv = 1.0 / negs.len() as f64;
    let mut loss = 0.0;
    // d loss / d s+ = -sigma(s- - s+), d loss / d s- = +sigma(s- - s+);
    // d s / d c[sub][code[sub]] is the query's sub-vector.
    let mut updates: Vec<(usize, f64)> = Vec::with_capacity(negs.len() + 1);
    let mut pos_coef = 0.0;
    for &n in negs {
        let sn = f64::from(index.score_code(&lut, n));
        loss += pairwise_logistic_loss(sp, sn) * inv;
        let g = sigmoid(sn - sp) * inv;
        pos_coef += g;
        updates.push((n, -g));
    }
    updates.push((pos, pos_coef));
    let codes: Vec<(Vec<u8>, f64)> = updates.iter().map(|&(row, c)| (index.codes().get(row).to_vec(), c)).collect();
    let (k, dsub) = (index.codebook().k(), index.codebook().dsub());
    let centroids = index.codebook_mut().centroids_mut();
    for (code, coef) in codes {
        let scale = lr * coef as f32;
        for (sub, &c) in code.iter().enumerate() {
            let start = (sub * k + c as usize) * dsub;
            let qsub = &q[sub * dsub..(sub + 1) * dsub];
            for (w, &qv) in centroids[start..start + dsub].iter_mut().zip(qsub) {
                *w += scale * qv;
            }
        }
    }
    Some(loss)
}

/// Refines centroids for `params.epochs` epochs. Negatives are re-mined at
/// the start of every epoch; with `doc_emb` (rows aligned with the index
/// ids) documents are re-encoded between epochs, otherwise codes stay fixed.
pub fn refine_centroids(
    index: &CompressedIndex,
    queries: &EmbeddingMatrix,
    pairs: &[TrainPair],
    params: &RefineParams,
    doc_emb: Option<&EmbeddingMatrix>,
) -> Result<(CompressedIndex, RefineTrace)> {
    if pairs.is_empty() {
        return Err(Error::invalid("refinement needs at least one training pair"));
    }
    if !(params.lr > 0.0 && params.lr.is_finite()) {
        return Err(Error::invalid(format!("learning rate must be positive, got {}", params.lr)));
    }
    if let Some(docs) = doc_emb {
        if docs.ids() != index.ids() {
            return Err(Error::invalid("document embeddings are not aligned with the index ids"));
        }
    }
    let p = prepare(index, queries, pairs)?;
    let initial_loss = mean_loss(index, &p, params.n_hard_negatives);
    let mut current = index.clone();
    let mut epoch_loss = Vec::with_capacity(params.epochs);
    for _ in 0..params.epochs {
        let negs = mine(&current, &p, params.n_hard_negatives);
        let mut sum = 0.0;
        let mut count = 0usize;
        for ((query, &positive), negs) in p.queries.iter().zip(&p.positive).zip(&negs) {
            if let Some(l) = step(&mut current, query, positive, negs, params.lr) {
                sum += l;
                count += 1;
            }
        }
        epoch_loss.push(if count == 0 { 0.0 } else { sum / count as f64 });
        if current.codebook().centroids().iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("refinement diverged; lower the learning rate"));
        }
        if let Some(docs) = doc_emb {
            let codes = encode(docs, current.codebook(), current.rotation())?;
            current.set_codes(codes);
        }
    }
    let final_loss = if params.epochs == 0 { initial_loss } else { mean_loss(&current, &p, params.n_hard_negatives) };
    Ok((current, RefineTrace { initial_loss, epoch_loss, final_loss }))
}
