use serde::Serialize;

use super::CompressedIndex;

/// Storage and estimated-speedup accounting for a PQ index with one byte
/// per code entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompressionStats {
    pub dim: usize,
    pub m: usize,
    pub n_docs: usize,
    /// `4 * D`
    pub raw_bytes_per_vector: f64,
    /// `M`
    pub code_bytes_per_vector: f64,
    /// Codes plus every non-code byte of the index file amortized over rows.
    pub stored_bytes_per_vector: f64,
    /// `4D / M`
    pub compression_ratio: f64,
    /// `(D + log2 n) / (M + log2 n)`
    pub estimated_speedup: f64,
}

/// `overhead_bytes` is the non-code part of the index file (header,
/// rotation, centroids, ids). Pass 0 for the pure per-vector law.
pub fn compression_stats(dim: usize, m: usize, n_docs: usize, overhead_bytes: usize) -> CompressionStats {
    let raw = 4.0 * dim as f64;
    let code = m as f64;
    let amortized = if n_docs == 0 { 0.0 } else { overhead_bytes as f64 / n_docs as f64 };
    let log_n = if n_docs > 0 { (n_docs as f64).log2() } else { 0.0 };
    CompressionStats {
        dim,
        m,
        n_docs,
        raw_bytes_per_vector: raw,
        code_bytes_per_vector: code,
        stored_bytes_per_vector: code + amortized,
        compression_ratio: raw / code,
        estimated_speedup: (dim as f64 + log_n) / (code + log_n),
    }
}

impl CompressedIndex {
    pub fn compression_stats(&self) -> CompressionStats {
        let layout = self.to_bytes_with_layout().1;
        compression_stats(self.codebook().dim(), self.codebook().m(), self.len(), layout.total - layout.codes)
    }
}
