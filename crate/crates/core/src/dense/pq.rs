use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::kmeans::{kmeans, kmeans_from, nearest, KMeansResult};
use super::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Largest codebook size that fits one byte per code entry.
pub const MAX_K: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PqParams {
    pub m: usize,
    pub k: usize,
    pub iters: usize,
    pub seed: u64,
    /// Train on a seeded sample of at most this many rows.
    pub train_rows: Option<usize>,
}

impl Default for PqParams {
    fn default() -> Self {
        Self { m: 96, k: 256, iters: 25, seed: 7, train_rows: None }
    }
}

impl PqParams {
    fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::invalid("M must be at least 1"));
        }
        if self.k == 0 || self.k > MAX_K {
            return Err(Error::invalid(format!("K must be in 1..={MAX_K}, got {}", self.k)));
        }
        Ok(())
    }
}

/// `m` codebooks of `k` centroids of width `dsub`.
#[derive(Debug, Clone, PartialEq)]
pub struct PqCodebook {
    dim: usize,
    m: usize,
    k: usize,
    dsub: usize,
    centroids: Vec<f32>,
}

impl PqCodebook {
    pub fn new(dim: usize, m: usize, k: usize, centroids: Vec<f32>) -> Result<Self> {
        if dim == 0 || m == 0 || k == 0 || k > MAX_K {
            return Err(Error::invalid(format!("bad codebook shape dim={dim} m={m} k={k}")));
        }
        let dsub = dim.div_ceil(m);
        if centroids.len() != m * k * dsub {
            return Err(Error::invalid(format!(
                "codebook needs {} centroid values, got {}",
                m * k * dsub,
                centroids.len()
            )));
        }
        if centroids.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite centroid value"));
        }
        Ok(Self { dim, m, k, dsub, centroids })
    }

    /// Original (unpadded) dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn padded_dim(&self) -> usize {
        self.m * self.dsub
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dsub(&self) -> usize {
        self.dsub
    }

    pub fn centroids(&self) -> &[f32] {
        &self.centroids
    }

    pub(crate) fn centroids_mut(&mut self) -> &mut [f32] {
        &mut self.centroids
    }

    /// Centroids of subspace `sub`, `k * dsub` values.
    pub fn subspace(&self, sub: usize) -> &[f32] {
        let w = self.k * self.dsub;
        &self.centroids[sub * w..(sub + 1) * w]
    }

    pub fn centroid(&self, sub: usize, j: usize) -> &[f32] {
        let start = (sub * self.k + j) * self.dsub;
        &self.centroids[start..start + self.dsub]
    }

    /// Centroids picked by `code`, concatenated, in the (rotated) padded
    /// space.
    pub fn concat(&self, code: &[u8]) -> Result<Vec<f32>> {
        if code.len() != self.m {
            return Err(Error::invalid(format!("code has {} entries, expected {}", code.len(), self.m)));
        }
        let mut out = Vec::with_capacity(self.padded_dim());
        for (sub, &c) in code.iter().enumerate() {
            if c as usize >= self.k {
                return Err(Error::invalid(format!("code entry {c} >= K={}", self.k)));
            }
            out.extend_from_slice(self.centroid(sub, c as usize));
        }
        Ok(out)
    }

    /// Zero-pads to the padded dimension and applies `rotation`.
    pub fn prepare(&self, v: &[f32], rotation: Option<&Rotation>) -> Result<Vec<f32>> {
        if v.len() != self.dim {
            return Err(Error::invalid(format!(
                "vector dimension {} does not match codebook dimension {}",
                v.len(),
                self.dim
            )));
        }
        let mut padded = v.to_vec();
        padded.resize(self.padded_dim(), 0.0);
        Ok(match rotation {
            Some(r) => r.apply(&padded),
            None => padded,
        })
    }

    pub fn encode_prepared(&self, v: &[f32], out: &mut [u8]) {
        for (sub, slot) in out.iter_mut().enumerate() {
            let part = &v[sub * self.dsub..(sub + 1) * self.dsub];
            *slot = nearest(part, self.subspace(sub), self.dsub).0 as u8;
        }
    }
}

/// Orthonormal `dim x dim` matrix, row-major. Applied as `y = R x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rotation {
    dim: usize,
    r: Vec<f32>,
}

pub(crate) const ORTHONORMAL_TOL: f64 = 1e-5;

impl Rotation {
    pub fn identity(dim: usize) -> Self {
        let mut r = vec![0.0; dim * dim];
        for i in 0..dim {
            r[i * dim + i] = 1.0;
        }
        Self { dim, r }
    }

    /// Checks `R^T R == I` within 1e-5 per entry.
    pub fn new(dim: usize, r: Vec<f32>) -> Result<Self> {
        if dim == 0 || r.len() != dim * dim {
            return Err(Error::invalid("rotation must be a non-empty square matrix"));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite rotation entry"));
        }
        let rot = Self { dim, r };
        let err = rot.orthonormality_error();
        if err > ORTHONORMAL_TOL {
            return Err(Error::invalid(format!("rotation not orthonormal (max |R^T R - I| = {err:e})")));
        }
        Ok(rot)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[f32] {
        &self.r
    }

    /// Largest entry of `|R^T R - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                let mut s = 0.0f64;
                for t in 0..d {
                    s += f64::from(self.r[t * d + i]) * f64::from(self.r[t * d + j]);
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    pub fn apply(&self, x: &[f32]) -> Vec<f32> {
        self.r.chunks_exact(self.dim).map(|row| super::dot(row, x)).collect()
    }

    pub fn apply_transpose(&self, y: &[f32]) -> Vec<f32> {
        let mut out = vec![0.0f32; self.dim];
        for (row, &yi) in self.r.chunks_exact(self.dim).zip(y) {
            for (o, &rij) in out.iter_mut().zip(row) {
                *o += rij * yi;
            }
        }
        out
    }

    /// `y_i = R x_i` for every row of `rows`.
    pub fn apply_rows(&self, rows: &[f32]) -> Vec<f32> {
        use nalgebra::DMatrix;
        let d = self.dim;
        let rt = DMatrix::from_row_slice(d, d, &self.r).transpose();
        let mut out = Vec::with_capacity(rows.len());
        for chunk in rows.chunks(4096 * d) {
            let x = DMatrix::from_row_slice(chunk.len() / d, d, chunk);
            let y = x * &rt;
            for i in 0..y.nrows() {
                out.extend(y.row(i).iter().copied());
            }
        }
        out
    }
}

/// Flat `n * m` byte codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codes {
    m: usize,
    data: Vec<u8>,
}

impl Codes {
    pub fn new(m: usize, data: Vec<u8>) -> Result<Self> {
        if m == 0 || !data.len().is_multiple_of(m) {
            return Err(Error::invalid("code bytes are not a whole number of codes"));
        }
        Ok(Self { m, data })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize) -> &[u8] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, u8> {
        self.data.chunks_exact(self.m)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PqTrace {
    /// Mean squared quantization error per training vector after each
    /// k-means step.
    pub distortion: Vec<f64>,
}

impl PqTrace {
    pub fn final_distortion(&self) -> f64 {
        *self.distortion.last().expect("non-empty trace")
    }
}

fn padded_rows(emb: &EmbeddingMatrix, padded: usize, rows: &[usize]) -> Vec<f32> {
    let mut out = Vec::with_capacity(rows.len() * padded);
    for &i in rows {
        out.extend_from_slice(emb.row(i));
        out.resize(out.len() + padded - emb.d(), 0.0);
    }
    out
}

/// Padded training rows, optionally a seeded sample in original order.
pub(crate) fn training_rows(emb: &EmbeddingMatrix, padded: usize, params: &PqParams) -> Vec<f32> {
    let n = emb.n();
    let mut rows: Vec<usize> = match params.train_rows {
        Some(limit) if limit < n => {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x5eed_5a4d_1e00_0000);
            sample(&mut rng, n, limit).into_vec()
        }
        _ => (0..n).collect(),
    };
    rows.sort_unstable();
    padded_rows(emb, padded, &rows)
}

fn subspace_columns(data: &[f32], padded: usize, dsub: usize, sub: usize) -> Vec<f32> {
    data.chunks_exact(padded).flat_map(|row| row[sub * dsub..(sub + 1) * dsub].iter().copied()).collect()
}

fn subspace_rng(seed: u64, sub: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (sub as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Result of independent k-means runs over every subspace.
pub(crate) struct SubspaceFit {
    pub centroids: Vec<f32>,
    pub assignments: Vec<Vec<u32>>,
    pub trace: Vec<f64>,
}

/// Runs k-means per subspace in parallel. With `warm` the given centroids
/// seed every subspace, otherwise k-means++ from the seed.
pub(crate) fn fit_subspaces(
    data: &[f32],
    padded: usize,
    m: usize,
    k: usize,
    iters: usize,
    seed: u64,
    warm: Option<&[f32]>,
) -> Result<SubspaceFit> {
    let dsub = padded / m;
    let n = data.len() / padded;
    let fits: Vec<KMeansResult> = (0..m)
        .into_par_iter()
        .map(|sub| {
            let cols = subspace_columns(data, padded, dsub, sub);
            match warm {
                Some(c) => Ok(kmeans_from(&cols, dsub, c[sub * k * dsub..(sub + 1) * k * dsub].to_vec(), iters)),
                None => kmeans(&cols, dsub, k, iters, &mut subspace_rng(seed, sub)),
            }
        })
        .collect::<Result<_>>()?;
    let steps = fits.iter().map(|f| f.trace.len()).max().unwrap_or(1);
    let trace = (0..steps)
        .map(|t| fits.iter().map(|f| f.trace[t.min(f.trace.len() - 1)]).sum::<f64>() / n as f64)
        .collect();
    let mut centroids = Vec::with_capacity(m * k * dsub);
    let mut assignments = Vec::with_capacity(m);
    for f in fits {
        centroids.extend(f.centroids);
        assignments.push(f.assignments);
    }
    Ok(SubspaceFit { centroids, assignments, trace })
}

/// Trains one k-means codebook per subspace. Dimensions not divisible by
/// `m` are zero-padded.
pub fn train_pq(emb: &EmbeddingMatrix, params: &PqParams) -> Result<(PqCodebook, PqTrace)> {
    params.validate()?;
    let dsub = emb.d().div_ceil(params.m);
    let padded = dsub * params.m;
    let data = training_rows(emb, padded, params);
    let n = data.len() / padded;
    if n < params.k {
        return Err(Error::invalid(format!("{n} training vectors cannot train K={} centroids", params.k)));
    }
    let fit = fit_subspaces(&data, padded, params.m, params.k, params.iters, params.seed, None)?;
    let codebook = PqCodebook::new(emb.d(), params.m, params.k, fit.centroids)?;
    Ok((codebook, PqTrace { distortion: fit.trace }))
}

/// Maps every row to its nearest centroid per subspace.
pub fn encode(emb: &EmbeddingMatrix, codebook: &PqCodebook, rotation: Option<&Rotation>) -> Result<Codes> {
    if emb.d() != codebook.dim() {
        return Err(Error::invalid(format!(
            "embedding dimension {} does not match codebook dimension {}",
            emb.d(),
            codebook.dim()
        )));
    }
    if let Some(r) = rotation {
        if r.dim() != codebook.padded_dim() {
            return Err(Error::invalid("rotation dimension does not match codebook"));
        }
    }
    let m = codebook.m();
    let mut data = vec![0u8; emb.n() * m];
    data.par_chunks_mut(m * 1024).enumerate().for_each(|(block, out)| {
        for (i, code) in out.chunks_exact_mut(m).enumerate() {
            let row = emb.row(block * 1024 + i);
            let v = codebook.prepare(row, rotation).expect("dimension checked above");
            codebook.encode_prepared(&v, code);
        }
    });
    Codes::new(m, data)
}

/// Concatenated centroids mapped back through the inverse rotation,
/// truncated to the original dimension.
pub fn reconstruct(code: &[u8], codebook: &PqCodebook, rotation: Option<&Rotation>) -> Result<Vec<f32>> {
    let concat = codebook.concat(code)?;
    let mut out = match rotation {
        Some(r) => r.apply_transpose(&concat),
        None => concat,
    };
    out.truncate(codebook.dim());
    Ok(out)
}
