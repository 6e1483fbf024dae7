//! Row-major embedding store and the `FDXE` file format.
//!
//! ```text
//! magic "FDXE" | version u32 | n u64 | d u32 | dtype u8 (0 = f32)
//! n*d f32 values, row-major | n ids (u32 length + UTF-8)
//! ```

use std::collections::HashSet;
use std::path::Path;

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::search::{SearchResult, TopK};

pub const EMBED_MAGIC: &[u8; 4] = b"FDXE";
pub const EMBED_VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    d: usize,
    data: Vec<f32>,
    ids: Vec<String>,
}

impl EmbeddingMatrix {
    pub fn new(d: usize, data: Vec<f32>, ids: Vec<String>) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        if data.len() != ids.len() * d {
            return Err(Error::invalid(format!(
                "{} values do not form {} rows of dimension {d}",
                data.len(),
                ids.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite embedding value"));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::invalid(format!("duplicate embedding id {dup:?}")));
        }
        Ok(Self { d, data, ids })
    }

    pub fn n(&self) -> usize {
        self.ids.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.d)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(EMBED_MAGIC);
        w.u32(EMBED_VERSION);
        w.u64(self.n() as u64);
        w.u32(self.d as u32);
        w.u8(DTYPE_F32);
        for v in &self.data {
            w.f32(*v);
        }
        for id in &self.ids {
            w.str(id);
        }
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(EMBED_MAGIC)?;
        r.version(EMBED_VERSION)?;
        let n = r.u64()?;
        let d = r.u32()? as usize;
        let dtype = r.u8()?;
        if dtype != DTYPE_F32 {
            return Err(Error::format(format!("unsupported dtype tag {dtype}")));
        }
        if d == 0 {
            return Err(Error::format("embedding dimension is zero"));
        }
        // Each row needs d*4 value bytes plus a 4-byte id length.
        let row_bytes = d as u64 * 4 + 4;
        if n.checked_mul(row_bytes).is_none_or(|need| need > r.remaining() as u64) {
            return Err(Error::format(format!("declared {n} rows exceed input size")));
        }
        let n = n as usize;
        let raw = r.take(n * d * 4)?;
        let data: Vec<f32> =
            raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        let ids = (0..n).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        Self::new(d, data, ids).map_err(|e| Error::format(format!("corrupt embedding file: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// f32 inner product with eight independent accumulators so the loop
/// vectorizes.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f32 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    acc.iter().sum::<f32>() + tail
}

/// Exact top-k by inner product, ties broken by id.
pub fn flat_search(emb: &EmbeddingMatrix, query: &[f32], k: usize) -> Result<Vec<SearchResult>> {
    if query.len() != emb.d() {
        return Err(Error::invalid(format!(
            "query dimension {} does not match index dimension {}",
            query.len(),
            emb.d()
        )));
    }
    let mut top = TopK::new(k);
    for (i, row) in emb.rows().enumerate() {
        let s = f64::from(dot(row, query));
        if top.admits(s) {
            top.push(s, emb.id(i), i);
        }
    }
    Ok(top.into_results())
}
