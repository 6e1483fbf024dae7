//! Deterministic feature-hashing embedder.
//!
//! Each token is hashed with 64-bit FNV-1a over `seed.to_le_bytes()`
//! followed by the token's UTF-8 bytes. The bucket is `hash % dim` and the
//! sign is `-1` when the top bit is set, `+1` otherwise. Bucket counts are
//! integers; the output is `(count as f64 / l2_norm) as f32` with the norm
//! computed in f64. Texts without tokens map to the zero vector.

use crate::corpus::Corpus;
use crate::dense::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::sparse::{units, Granularity};
use crate::text::tokenize;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        Ok(Self { dim, seed })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn hash(&self, token: &str) -> u64 {
        let mut h = FNV_OFFSET;
        for b in self.seed.to_le_bytes().iter().chain(token.as_bytes()) {
            h ^= u64::from(*b);
            h = h.wrapping_mul(FNV_PRIME);
        }
        h
    }

    pub fn embed(&self, text: &str) -> Vec<f32> {
        let mut counts = vec![0i64; self.dim];
        for token in tokenize(text) {
            let h = self.hash(&token);
            let bucket = (h % self.dim as u64) as usize;
            counts[bucket] += if h >> 63 == 1 { -1 } else { 1 };
        }
        let norm = counts.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
        if norm == 0.0 {
            return vec![0.0; self.dim];
        }
        counts.iter().map(|&c| (c as f64 / norm) as f32).collect()
    }

    pub fn embed_units(&self, units: &[(String, String)]) -> Result<EmbeddingMatrix> {
        let mut data = Vec::with_capacity(units.len() * self.dim);
        for (_, text) in units {
            data.extend(self.embed(text));
        }
        EmbeddingMatrix::new(self.dim, data, units.iter().map(|(id, _)| id.clone()).collect())
    }

    pub fn embed_corpus(&self, corpus: &Corpus, granularity: Granularity) -> Result<EmbeddingMatrix> {
        self.embed_units(&units(corpus, granularity))
    }
}
