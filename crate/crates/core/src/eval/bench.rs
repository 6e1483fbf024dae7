//! Latency harness: untimed warmup rounds, then every query timed
//! `repeats` times on the calling thread with a monotonic clock.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::SearchResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupVs {
    pub baseline: String,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub label: String,
    pub warmup: usize,
    pub repeats: usize,
    pub n_queries: usize,
    /// Mean over the `repeats` samples of each query.
    pub per_query_ms: Vec<f64>,
    /// Statistics over all `n_queries * repeats` samples.
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    /// Hash of every query's results; identical across repeats when
    /// `checksum_consistent`.
    pub checksum: String,
    pub checksum_consistent: bool,
    pub speedup_vs: Option<SpeedupVs>,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;

fn fnv(mut h: u64, bytes: &[u8]) -> u64 {
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn checksum(results: &[SearchResult]) -> u64 {
    results.iter().fold(FNV_OFFSET, |h, r| {
        let h = fnv(h, r.doc_id.as_bytes());
        fnv(fnv(h, &[0]), &r.score.to_bits().to_le_bytes())
    })
}

pub(crate) fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Nearest-rank 95th percentile.
pub(crate) fn p95(sorted: &[f64]) -> f64 {
    let rank = (0.95 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Times `search(q)` for every query index `q < n_queries`.
pub fn bench<F>(label: &str, n_queries: usize, warmup: usize, repeats: usize, mut search: F) -> Result<LatencyReport>
where
    F: FnMut(usize) -> Vec<SearchResult>,
{
    if repeats == 0 {
        return Err(Error::invalid("bench needs at least one repeat"));
    }
    if n_queries == 0 {
        return Err(Error::invalid("bench needs at least one query"));
    }
    for _ in 0..warmup {
        for q in 0..n_queries {
            std::hint::black_box(search(q));
        }
    }
    let mut samples = vec![Vec::with_capacity(repeats); n_queries];
    let mut sums: Vec<Option<u64>> = vec![None; n_queries];
    let mut consistent = true;
    for _ in 0..repeats {
        for q in 0..n_queries {
            let start = Instant::now();
            let results = search(q);
            let elapsed = start.elapsed();
            samples[q].push(elapsed.as_secs_f64() * 1e3);
            let c = checksum(&results);
            match sums[q] {
                None => sums[q] = Some(c),
                Some(prev) => consistent &= prev == c,
            }
        }
    }
    let per_query_ms = samples.iter().map(|s| s.iter().sum::<f64>() / s.len() as f64).collect();
    let mut all: Vec<f64> = samples.into_iter().flatten().collect();
    all.sort_by(f64::total_cmp);
    let combined = sums.iter().fold(FNV_OFFSET, |h, c| fnv(h, &c.unwrap_or(0).to_le_bytes()));
    Ok(LatencyReport {
        label: label.to_string(),
        warmup,
        repeats,
        n_queries,
        per_query_ms,
        mean_ms: all.iter().sum::<f64>() / all.len() as f64,
        median_ms: median(&all),
        p95_ms: p95(&all),
        checksum: format!("{combined:016x}"),
        checksum_consistent: consistent,
        speedup_vs: None,
    })
}

/// `baseline.median_ms / candidate.median_ms`.
pub fn speedup(candidate: &LatencyReport, baseline: &LatencyReport) -> Result<f64> {
    if candidate.n_queries == 0 || baseline.n_queries == 0 {
        return Err(Error::invalid("speedup of an empty report"));
    }
    if baseline.median_ms <= 0.0 || candidate.median_ms <= 0.0 {
        return Err(Error::invalid("zero median latency; cannot form a speedup ratio"));
    }
    Ok(baseline.median_ms / candidate.median_ms)
}
