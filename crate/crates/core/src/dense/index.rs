//! Compressed dense index and asymmetric-distance search.
//!
//! `FDXQ` layout, little-endian:
//!
//! ```text
//! magic "FDXQ" | version u32 | padded_dim u32 | m u32 | k u32 | original_dim u32
//! has_rotation u8 | [padded_dim^2 f32, row-major]
//! m*k*dsub f32 centroids
//! n u64 | n*m u8 codes
//! n ids (u32 length + UTF-8)
//! ```

use std::collections::HashSet;
use std::path::Path;

use super::pq::{encode, Codes, PqCodebook, Rotation, MAX_K};
use super::EmbeddingMatrix;
use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::search::{SearchResult, TopK};

pub const QUANT_MAGIC: &[u8; 4] = b"FDXQ";
pub const QUANT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CompressedIndex {
    codebook: PqCodebook,
    rotation: Option<Rotation>,
    codes: Codes,
    ids: Vec<String>,
}

/// Byte sizes of each `FDXQ` section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct IndexLayout {
    pub header: usize,
    pub rotation: usize,
    pub centroids: usize,
    pub codes: usize,
    pub ids: usize,
    pub total: usize,
}

impl CompressedIndex {
    pub fn new(codebook: PqCodebook, rotation: Option<Rotation>, codes: Codes, ids: Vec<String>) -> Result<Self> {
        if codes.len() != ids.len() || codes.m() != codebook.m() {
            return Err(Error::invalid("codes and ids disagree with each other or the codebook"));
        }
        if codes.as_bytes().iter().any(|&c| c as usize >= codebook.k()) {
            return Err(Error::invalid("code entry out of range for K"));
        }
        if rotation.as_ref().is_some_and(|r| r.dim() != codebook.padded_dim()) {
            return Err(Error::invalid("rotation dimension does not match codebook"));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::invalid(format!("duplicate id {dup:?}")));
        }
        Ok(Self { codebook, rotation, codes, ids })
    }

    /// Encodes every row of `emb`.
    pub fn build(emb: &EmbeddingMatrix, codebook: PqCodebook, rotation: Option<Rotation>) -> Result<Self> {
        let codes = encode(emb, &codebook, rotation.as_ref())?;
        Self::new(codebook, rotation, codes, emb.ids().to_vec())
    }

    pub fn codebook(&self) -> &PqCodebook {
        &self.codebook
    }

    pub(crate) fn codebook_mut(&mut self) -> &mut PqCodebook {
        &mut self.codebook
    }

    pub(crate) fn set_codes(&mut self, codes: Codes) {
        debug_assert_eq!(codes.len(), self.ids.len());
        self.codes = codes;
    }

    pub fn rotation(&self) -> Option<&Rotation> {
        self.rotation.as_ref()
    }

    pub fn codes(&self) -> &Codes {
        &self.codes
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Pads and rotates a raw query.
    pub fn prepare_query(&self, query: &[f32]) -> Result<Vec<f32>> {
        self.codebook.prepare(query, self.rotation.as_ref())
    }

    /// `M x K` table of sub-query/centroid inner products, subspace-major.
    pub fn lookup_table(&self, prepared: &[f32]) -> Vec<f32> {
        let (m, k, dsub) = (self.codebook.m(), self.codebook.k(), self.codebook.dsub());
        let mut lut = Vec::with_capacity(m * k);
        for sub in 0..m {
            let q = &prepared[sub * dsub..(sub + 1) * dsub];
            for c in self.codebook.subspace(sub).chunks_exact(dsub) {
                lut.push(q.iter().zip(c).map(|(a, b)| a * b).sum());
            }
        }
        lut
    }

    /// Approximate score of row `i` from a lookup table.
    #[inline]
    pub fn score_code(&self, lut: &[f32], i: usize) -> f32 {
        score_code(lut, self.codebook.k(), self.codes.get(i))
    }

    pub fn adc_search(&self, query: &[f32], k: usize) -> Result<Vec<SearchResult>> {
        let prepared = self.prepare_query(query)?;
        let lut = self.lookup_table(&prepared);
        Ok(self.scan(&lut, k, |_| false))
    }

    fn top_k(&self, lut: &[f32], k: usize, skip: impl Fn(usize) -> bool) -> TopK<'_> {
        let ksize = self.codebook.k();
        let table = padded_table(lut, ksize);
        let mut top = TopK::new(k);
        for (i, code) in self.codes.iter().enumerate() {
            let s = f64::from(scan_score(&table, ksize, code));
            if top.admits(s) && !skip(i) {
                top.push(s, &self.ids[i], i);
            }
        }
        top
    }

    /// Top-k over all codes except those rejected by `skip`.
    pub(crate) fn scan(&self, lut: &[f32], k: usize, skip: impl Fn(usize) -> bool) -> Vec<SearchResult> {
        self.top_k(lut, k, skip).into_results()
    }

    /// Like [`Self::scan`] but returns row ordinals, best first.
    pub(crate) fn scan_ords(&self, lut: &[f32], k: usize, skip: impl Fn(usize) -> bool) -> Vec<usize> {
        self.top_k(lut, k, skip).into_sorted().into_iter().map(|(i, _)| i).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_bytes_with_layout().0
    }

    pub fn to_bytes_with_layout(&self) -> (Vec<u8>, IndexLayout) {
        let cb = &self.codebook;
        let mut w = Writer::new();
        w.bytes(QUANT_MAGIC);
        w.u32(QUANT_VERSION);
        w.u32(cb.padded_dim() as u32);
        w.u32(cb.m() as u32);
        w.u32(cb.k() as u32);
        w.u32(cb.dim() as u32);
        w.u8(u8::from(self.rotation.is_some()));
        let header = w.len();
        if let Some(r) = &self.rotation {
            for v in r.matrix() {
                w.f32(*v);
            }
        }
        let rotation = w.len() - header;
        for v in cb.centroids() {
            w.f32(*v);
        }
        let centroids = w.len() - header - rotation;
        w.u64(self.len() as u64);
        let before_codes = w.len();
        w.bytes(self.codes.as_bytes());
        let codes = w.len() - before_codes;
        let before_ids = w.len();
        for id in &self.ids {
            w.str(id);
        }
        let ids = w.len() - before_ids;
        let total = w.len();
        // the u64 row count is header overhead
        (w.into_inner(), IndexLayout { header: header + 8, rotation, centroids, codes, ids, total })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(QUANT_MAGIC)?;
        r.version(QUANT_VERSION)?;
        let padded = r.u32()? as usize;
        let m = r.u32()? as usize;
        let k = r.u32()? as usize;
        let dim = r.u32()? as usize;
        if m == 0 || dim == 0 || dim.div_ceil(m) * m != padded {
            return Err(Error::format(format!("inconsistent shape padded={padded} m={m} dim={dim}")));
        }
        let rotation = match r.u8()? {
            0 => None,
            1 => {
                let n = padded.checked_mul(padded).filter(|n| n * 4 <= r.remaining());
                let n = n.ok_or_else(|| Error::format("rotation exceeds input"))?;
                let vals = (0..n).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
                Some(Rotation::new(padded, vals).map_err(|e| Error::format(e.to_string()))?)
            }
            b => return Err(Error::format(format!("bad rotation flag {b}"))),
        };
        let n_cent = m
            .checked_mul(k)
            .and_then(|v| v.checked_mul(padded / m))
            .filter(|n| n.saturating_mul(4) <= r.remaining())
            .ok_or_else(|| Error::format("centroids exceed input"))?;
        let centroids = (0..n_cent).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        let codebook = PqCodebook::new(dim, m, k, centroids).map_err(|e| Error::format(e.to_string()))?;
        let n = r.count_u64(m + 4)?;
        let codes = Codes::new(m, r.take(n * m)?.to_vec()).map_err(|e| Error::format(e.to_string()))?;
        let ids = (0..n).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        Self::new(codebook, rotation, codes, ids).map_err(|e| Error::format(format!("corrupt compressed index: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<IndexLayout> {
        let (bytes, layout) = self.to_bytes_with_layout();
        std::fs::write(path, bytes)?;
        Ok(layout)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[inline]
fn score_code(lut: &[f32], k: usize, code: &[u8]) -> f32 {
    score_strided(lut, k, code)
}

/// Extra floats per scan-table row. With rows exactly 1 KiB apart, codes
/// that repeat a value across subspaces would map every lookup to the same
/// few cache sets.
const PAD: usize = 16;
const FULL_STRIDE: usize = MAX_K + PAD;

fn padded_table(lut: &[f32], k: usize) -> Vec<f32> {
    let stride = k + PAD;
    let mut table = vec![0.0; lut.len() / k * stride];
    for (dst, src) in table.chunks_exact_mut(stride).zip(lut.chunks_exact(k)) {
        dst[..k].copy_from_slice(src);
    }
    table
}

/// Sums `table[sub * stride + code[sub]]` into four interleaved
/// accumulators. Every scoring path uses this order so scores agree bitwise.
#[inline]
fn score_strided(table: &[f32], stride: usize, code: &[u8]) -> f32 {
    let mut acc = [0.0f32; 4];
    let mut chunks = code.chunks_exact(4);
    let mut base = 0;
    for c in &mut chunks {
        acc[0] += table[base + c[0] as usize];
        acc[1] += table[base + stride + c[1] as usize];
        acc[2] += table[base + 2 * stride + c[2] as usize];
        acc[3] += table[base + 3 * stride + c[3] as usize];
        base += 4 * stride;
    }
    let mut tail = 0.0;
    for &c in chunks.remainder() {
        tail += table[base + c as usize];
        base += stride;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn scan_score(table: &[f32], k: usize, code: &[u8]) -> f32 {
    if k != MAX_K {
        return score_strided(table, k + PAD, code);
    }
    // Fixed-size row groups let a u8 index without bounds checks.
    let mut acc = [0.0f32; 4];
    let codes = code.chunks_exact(4);
    let tail_codes = codes.remainder();
    let (groups, tail_rows) = table.as_chunks::<{ 4 * FULL_STRIDE }>();
    for (c, r) in codes.zip(groups) {
        acc[0] += r[c[0] as usize];
        acc[1] += r[FULL_STRIDE + c[1] as usize];
        acc[2] += r[2 * FULL_STRIDE + c[2] as usize];
        acc[3] += r[3 * FULL_STRIDE + c[3] as usize];
    }
    let mut tail = 0.0;
    for (&c, r) in tail_codes.iter().zip(tail_rows.chunks_exact(FULL_STRIDE)) {
        tail += r[c as usize];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{reconstruct, train_pq, PqParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn padded_scan_matches_plain_scores_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (m, k) in [(6, 256), (7, 256), (5, 16), (8, 3)] {
            let lut: Vec<f32> = (0..m * k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let table = padded_table(&lut, k);
            for _ in 0..50 {
                let code: Vec<u8> = (0..m).map(|_| rng.random_range(0..k) as u8).collect();
                assert_eq!(scan_score(&table, k, &code).to_bits(), score_code(&lut, k, &code).to_bits());
            }
        }
    }

    #[test]
    fn two_centroid_ordering() {
        let cb = PqCodebook::new(2, 1, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let idx = CompressedIndex::new(cb, None, Codes::new(1, vec![0, 1]).unwrap(), vec!["a".into(), "b".into()]).unwrap();
        let res = idx.adc_search(&[0.1, 0.9], 2).unwrap();
        assert_eq!(res[0].doc_id, "b");
        assert!(idx.adc_search(&[0.1], 2).is_err());
    }

    #[test]
    fn adc_equals_reconstruction_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (n, d) = (500, 12);
        let data: Vec<f32> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let emb = EmbeddingMatrix::new(d, data, (0..n).map(|i| format!("v{i}")).collect()).unwrap();
        let (cb, _) = train_pq(&emb, &PqParams { m: 5, k: 16, iters: 10, seed: 8, train_rows: None }).unwrap();
        let idx = CompressedIndex::build(&emb, cb, None).unwrap();
        for _ in 0..20 {
            let q: Vec<f32> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lut = idx.lookup_table(&idx.prepare_query(&q).unwrap());
            for i in 0..n {
                let rec = reconstruct(idx.codes().get(i), idx.codebook(), None).unwrap();
                let exact: f64 = rec.iter().zip(&q).map(|(a, b)| f64::from(*a) * f64::from(*b)).sum();
                assert!((f64::from(idx.score_code(&lut, i)) - exact).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn file_roundtrip_and_section_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data: Vec<f32> = (0..40 * 6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let emb = EmbeddingMatrix::new(6, data, (0..40).map(|i| format!("v{i}")).collect()).unwrap();
        let (cb, _) = train_pq(&emb, &PqParams { m: 4, k: 8, iters: 5, seed: 9, train_rows: None }).unwrap();
        for rotation in [None, Some(Rotation::identity(8))] {
            let idx = CompressedIndex::build(&emb, cb.clone(), rotation).unwrap();
            let (bytes, layout) = idx.to_bytes_with_layout();
            assert_eq!(layout.codes, 40 * 4);
            assert_eq!(layout.total, bytes.len());
            assert_eq!(CompressedIndex::from_bytes(&bytes).unwrap(), idx);
        }
    }

    #[test]
    fn rejects_out_of_range_codes() {
        let cb = PqCodebook::new(1, 1, 2, vec![0.0, 1.0]).unwrap();
        assert!(CompressedIndex::new(cb, None, Codes::new(1, vec![2]).unwrap(), vec!["a".into()]).is_err());
    }
}
