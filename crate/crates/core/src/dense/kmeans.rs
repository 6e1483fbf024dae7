//! Lloyd's k-means with k-means++ seeding over contiguous row-major data.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// `k * dim` row-major.
    pub centroids: Vec<f32>,
    pub assignments: Vec<u32>,
    /// Sum of squared errors after each assignment step, starting with the
    /// seeding. Never increases.
    pub trace: Vec<f64>,
}

impl KMeansResult {
    pub fn sse(&self) -> f64 {
        *self.trace.last().expect("trace holds at least the seeding step")
    }
}

#[inline]
fn sq_dist(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid (lowest index on ties) and its squared
/// distance.
#[inline]
pub(crate) fn nearest(point: &[f32], centroids: &[f32], dim: usize) -> (usize, f32) {
    let mut best = (0, f32::INFINITY);
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign(data: &[f32], dim: usize, centroids: &[f32]) -> (Vec<u32>, f64) {
    let mut sse = 0.0f64;
    let assignments = data
        .chunks_exact(dim)
        .map(|p| {
            let (j, d) = nearest(p, centroids, dim);
            sse += f64::from(d);
            j as u32
        })
        .collect();
    (assignments, sse)
}

fn update(data: &[f32], dim: usize, assignments: &[u32], previous: &[f32]) -> Vec<f32> {
    let k = previous.len() / dim;
    let mut sums = vec![0.0f64; k * dim];
    let mut counts = vec![0usize; k];
    for (p, &a) in data.chunks_exact(dim).zip(assignments) {
        let a = a as usize;
        counts[a] += 1;
        for (s, v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(p) {
            *s += f64::from(*v);
        }
    }
    let mut out = previous.to_vec();
    for j in 0..k {
        // an empty cluster keeps its centroid
        if counts[j] > 0 {
            for t in 0..dim {
                out[j * dim + t] = (sums[j * dim + t] / counts[j] as f64) as f32;
            }
        }
    }
    out
}

fn plus_plus<R: Rng>(data: &[f32], dim: usize, k: usize, rng: &mut R) -> Vec<f32> {
    let n = data.len() / dim;
    let row = |i: usize| &data[i * dim..(i + 1) * dim];
    let first = rng.random_range(0..n);
    let mut centroids = Vec::with_capacity(k * dim);
    centroids.extend_from_slice(row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| f64::from(sq_dist(row(i), row(first)))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut cum = 0.0;
            let mut pick = None;
            for (i, w) in d2.iter().enumerate() {
                cum += w;
                if cum > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave the walk short of the target
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap_or(0))
        } else {
            (first + c) % n
        };
        let new = row(pick).to_vec();
        for (i, w) in d2.iter_mut().enumerate() {
            *w = w.min(f64::from(sq_dist(row(i), &new)));
        }
        centroids.extend_from_slice(&new);
    }
    centroids
}

/// Clusters `data` (`n * dim`) into `k` groups.
pub fn kmeans<R: Rng>(data: &[f32], dim: usize, k: usize, iters: usize, rng: &mut R) -> Result<KMeansResult> {
    if dim == 0 || !data.len().is_multiple_of(dim) {
        return Err(Error::invalid("k-means data is not a whole number of rows"));
    }
    let n = data.len() / dim;
    if k == 0 {
        return Err(Error::invalid("k-means needs k >= 1"));
    }
    if n < k {
        return Err(Error::invalid(format!("{n} training vectors cannot seed {k} centroids")));
    }
    let seeds = plus_plus(data, dim, k, rng);
    Ok(kmeans_from(data, dim, seeds, iters))
}

/// Lloyd iterations from given centroids. Stops early when assignments
/// stop changing or an update fails to reduce the error.
pub fn kmeans_from(data: &[f32], dim: usize, centroids: Vec<f32>, iters: usize) -> KMeansResult {
    let (mut assignments, mut sse) = assign(data, dim, &centroids);
    let mut centroids = centroids;
    let mut trace = vec![sse];
    for _ in 0..iters {
        let next = update(data, dim, &assignments, &centroids);
        let (next_assign, next_sse) = assign(data, dim, &next);
        if next_sse > sse {
            break;
        }
        let converged = next_assign == assignments;
        centroids = next;
        assignments = next_assign;
        sse = next_sse;
        trace.push(sse);
        if converged {
            break;
        }
    }
    KMeansResult { centroids, assignments, trace }
}
