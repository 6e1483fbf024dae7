//! Rotation learning by alternating PQ k-means and orthogonal Procrustes.

use nalgebra::DMatrix;

use super::pq::{fit_subspaces, training_rows, PqCodebook, PqParams, Rotation};
use super::EmbeddingMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpqParams {
    pub pq: PqParams,
    pub outer_iters: usize,
    /// Lloyd iterations per outer iteration after the initial PQ fit.
    pub inner_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpqTrace {
    /// Distortion of the initial PQ fit, then after each outer iteration.
    pub objective: Vec<f64>,
    /// `max |R^T R - I|` after each outer iteration.
    pub orthonormality: Vec<f64>,
}

/// Orthogonal `R` minimizing `sum ||R x_i - y_i||^2` over row pairs.
///
/// With `X^T Y = U S V^T` the minimizer is `V U^T`.
pub fn procrustes(x: &[f32], y: &[f32], dim: usize) -> Result<Rotation> {
    if x.len() != y.len() || dim == 0 || !x.len().is_multiple_of(dim) {
        return Err(Error::invalid("procrustes inputs must be equally sized row matrices"));
    }
    let mut cross = DMatrix::<f64>::zeros(dim, dim);
    let chunk = 2048 * dim;
    for (xc, yc) in x.chunks(chunk).zip(y.chunks(chunk)) {
        let rows = xc.len() / dim;
        let xm = DMatrix::from_row_iterator(rows, dim, xc.iter().map(|&v| f64::from(v)));
        let ym = DMatrix::from_row_iterator(rows, dim, yc.iter().map(|&v| f64::from(v)));
        cross += xm.transpose() * ym;
    }
    let svd = cross.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Invariant("SVD did not return singular vectors".into())),
    };
    let r = v_t.transpose() * u.transpose();
    let mut data = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        data.extend(r.row(i).iter().map(|&v| v as f32));
    }
    Rotation::new(dim, data).map_err(|e| Error::Invariant(format!("procrustes: {e}")))
}

fn reconstruct_rows(centroids: &[f32], assignments: &[Vec<u32>], m: usize, k: usize, dsub: usize) -> Vec<f32> {
    let n = assignments.first().map_or(0, Vec::len);
    let mut out = Vec::with_capacity(n * m * dsub);
    for i in 0..n {
        for (sub, assign) in assignments.iter().enumerate() {
            let start = (sub * k + assign[i] as usize) * dsub;
            out.extend_from_slice(&centroids[start..start + dsub]);
        }
    }
    out
}

/// With `outer_iters == 0` this is exactly [`super::train_pq`] plus an
/// identity rotation.
pub fn train_opq(emb: &EmbeddingMatrix, params: &OpqParams) -> Result<(Rotation, PqCodebook, OpqTrace)> {
    let pq = params.pq;
    let (initial, _) = super::train_pq(emb, &pq)?;
    let (m, k, dsub) = (initial.m(), initial.k(), initial.dsub());
    let padded = initial.padded_dim();
    let x = training_rows(emb, padded, &pq);

    let mut rotation = Rotation::identity(padded);
    let mut centroids = initial.centroids().to_vec();
    let mut fit = fit_subspaces(&x, padded, m, k, 0, pq.seed, Some(&centroids))?;
    let mut objective = vec![fit.trace[0]];
    let mut orthonormality = Vec::new();

    for _ in 0..params.outer_iters {
        let current = *objective.last().expect("seeded above");
        let y = reconstruct_rows(&centroids, &fit.assignments, m, k, dsub);
        let candidate = procrustes(&x, &y, padded)?;
        let rotated = candidate.apply_rows(&x);
        let next = fit_subspaces(&rotated, padded, m, k, params.inner_iters, pq.seed, Some(&centroids))?;
        // Both half-steps are exact minimizers; only rounding can make
        // the objective rise, in which case we are at the fixed point.
        if next.trace[0] > current {
            break;
        }
        rotation = candidate;
        centroids = next.centroids.clone();
        objective.push(*next.trace.last().expect("non-empty"));
        orthonormality.push(rotation.orthonormality_error());
        fit = next;
    }
    let codebook = PqCodebook::new(emb.d(), m, k, centroids)?;
    Ok((rotation, codebook, OpqTrace { objective, orthonormality }))
}
