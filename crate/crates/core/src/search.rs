//! Ranked results and the bounded top-k selector shared by every index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub doc_id: String,
    pub score: f64,
}

/// Ranking order: score descending, then id ascending.
pub fn rank_cmp(a_score: f64, a_id: &str, b_score: f64, b_id: &str) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_id.cmp(b_id))
}

pub fn sort_results(results: &mut [SearchResult]) {
    results.sort_by(|a, b| rank_cmp(a.score, &a.doc_id, b.score, &b.doc_id));
}

struct Entry<'a> {
    score: f64,
    id: &'a str,
    ord: usize,
}

// Heap order puts the worst-ranked entry on top so it can be evicted.
impl Ord for Entry<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        rank_cmp(self.score, self.id, other.score, other.id)
    }
}

impl PartialOrd for Entry<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Entry<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry<'_> {}

/// Bounded min-heap keeping the best `k` candidates seen so far.
pub struct TopK<'a> {
    k: usize,
    heap: BinaryHeap<Entry<'a>>,
}

impl<'a> TopK<'a> {
    pub fn new(k: usize) -> Self {
        Self { k, heap: BinaryHeap::with_capacity(k.saturating_add(1).min(1 << 16)) }
    }

    /// Offers a candidate identified by its ordinal `ord` and id.
    #[inline]
    pub fn push(&mut self, score: f64, id: &'a str, ord: usize) {
        if self.k == 0 {
            return;
        }
        if self.heap.len() < self.k {
            self.heap.push(Entry { score, id, ord });
        } else if let Some(worst) = self.heap.peek() {
            if rank_cmp(score, id, worst.score, worst.id) == Ordering::Less {
                self.heap.pop();
                self.heap.push(Entry { score, id, ord });
            }
        }
    }

    /// Cheap pre-check: can `score` possibly enter the heap?
    #[inline]
    pub fn admits(&self, score: f64) -> bool {
        self.heap.len() < self.k || self.heap.peek().is_some_and(|w| score >= w.score)
    }

    /// Best-first list of `(ord, score)`.
    pub fn into_sorted(self) -> Vec<(usize, f64)> {
        let mut v = self.heap.into_vec();
        v.sort();
        v.into_iter().map(|e| (e.ord, e.score)).collect()
    }

    pub fn into_results(self) -> Vec<SearchResult> {
        let mut v = self.heap.into_vec();
        v.sort();
        v.into_iter()
            .map(|e| SearchResult { doc_id: e.id.to_string(), score: e.score })
            .collect()
    }
}
