//! Self-tuning Gaussian affinity graphs over embedding rows.
//!
//! Each sample gets a local bandwidth equal to its distance to its M-th
//! nearest neighbor (self excluded), so dense and sparse regions of the
//! embedding space are treated symmetrically. The affinity between two
//! samples divides their squared distance by the product of both bandwidths;
//! row-normalizing the result gives the random-walk transition matrix used by
//! power iteration.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// An affinity graph and its row-stochastic normalization.
#[derive(Debug, Clone)]
pub struct AffinityGraph {
    /// Symmetric affinity matrix, unit diagonal.
    pub a: Matrix,
    /// Row-stochastic transition matrix `D^-1 A`.
    pub w: Matrix,
    /// Per-sample local bandwidths (M-th nearest-neighbor distances).
    pub sigmas: Vec<f64>,
    /// How many bandwidths were clamped up to the numerical floor. Non-zero
    /// means coincident (or near-coincident) points; affinities stay finite
    /// but locality is meaningless for those samples.
    pub sigma_floor_hits: usize,
}

/// Builds a self-tuning affinity graph over the rows of `h`.
///
/// `a[i][j] = exp(-d2(i, j) / (sigma_i * sigma_j))` where `sigma_i` is the
/// distance from sample i to its `m`-th nearest other sample. Bandwidths are
/// floored at `1e-12 * (1 + median pairwise distance)` so duplicated points
/// cannot produce a zero divisor.
pub fn build_affinity(h: &Matrix, m: usize) -> Result<AffinityGraph> {
    let n = h.rows();
    if m == 0 {
        return Err(Error::invalid_input("affinity neighbor count must be at least 1"));
    }
    if n < m + 1 {
        return Err(Error::invalid_input(format!(
            "affinity graph needs at least m + 1 = {} samples, got {n}",
            m + 1
        )));
    }
    if !h.is_finite() {
        return Err(Error::invalid_input("embeddings contain non-finite values"));
    }

    // Squared distances once; reused for bandwidths and affinities.
    let mut d2 = Matrix::zeros(n, n);
    for i in 0..n {
        let ri = h.row(i);
        for j in (i + 1)..n {
            let rj = h.row(j);
            let mut acc = 0.0;
            for k in 0..h.cols() {
                let diff = ri[k] - rj[k];
                acc += diff * diff;
            }
            d2.set(i, j, acc);
            d2.set(j, i, acc);
        }
    }

    let mut all_dists: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            all_dists.push(d2.get(i, j).sqrt());
        }
    }
    let mid = all_dists.len() / 2;
    let (_, median, _) = all_dists
        .select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).expect("finite distances"));
    let floor = 1e-12 * (1.0 + *median);

    let mut sigmas = Vec::with_capacity(n);
    let mut floor_hits = 0usize;
    let mut scratch: Vec<f64> = Vec::with_capacity(n - 1);
    for i in 0..n {
        scratch.clear();
        scratch.extend((0..n).filter(|&j| j != i).map(|j| d2.get(i, j)));
        let (_, kth, _) = scratch
            .select_nth_unstable_by(m - 1, |a, b| a.partial_cmp(b).expect("finite distances"));
        let mut sigma = kth.sqrt();
        if sigma < floor {
            sigma = floor;
            floor_hits += 1;
        }
        sigmas.push(sigma);
    }
    if floor_hits > 0 {
        log::warn!("affinity: {floor_hits} bandwidth(s) hit the numerical floor (duplicate points?)");
    }

    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        a.set(i, i, 1.0);
        for j in (i + 1)..n {
            let value = (-d2.get(i, j) / (sigmas[i] * sigmas[j])).exp();
            a.set(i, j, value);
            a.set(j, i, value);
        }
    }

    let w = degree_normalize(&a)?;
    Ok(AffinityGraph { a, w, sigmas, sigma_floor_hits: floor_hits })
}

/// Row-normalizes a non-negative square matrix into a row-stochastic one:
/// `W = D^-1 A` with `D` the diagonal of row sums.
pub fn degree_normalize(a: &Matrix) -> Result<Matrix> {
    if a.rows() != a.cols() {
        return Err(Error::invalid_input(format!(
            "degree normalization needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let mut w = a.clone();
    for i in 0..n {
        let row = w.row_mut(i);
        if row.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid_input(format!("affinity row {i} has negative entries")));
        }
        let degree: f64 = row.iter().sum();
        if degree == 0.0 {
            return Err(Error::invalid_input(format!(
                "row {i} has zero degree; the graph has an isolated vertex"
            )));
        }
        for v in row.iter_mut() {
            *v /= degree;
        }
    }
    Ok(w)
}
