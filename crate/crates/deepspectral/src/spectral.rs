//! Power iteration over the transition matrix and spectral reference
//! operations (dominant-subspace energy, normalized-cut embedding).
//!
//! Repeatedly applying the row-stochastic `W` to the embedding matrix damps
//! everything outside the graph's dominant eigenspace, which is exactly the
//! subspace spanned by cluster indicators when the graph has block structure.
//! Full eigendecompositions appear only in the verification and baseline
//! paths, never in the training loop.

use crate::error::{Error, Result};
use crate::numerics::{sym_eig, Matrix};

/// Outcome of smoothing an embedding with repeated `W` applications.
#[derive(Debug, Clone)]
pub struct PowerIterationResult {
    /// Smoothed embedding `W^T_stop * h0`.
    pub z: Matrix,
    /// Number of applications actually performed (`1 ..= t_max`).
    pub iterations: usize,
    /// Acceleration values `a(t)` for `t = 2 ..= iterations`: the infinity
    /// norm of the change in column-sum velocity between consecutive steps.
    pub accelerations: Vec<f64>,
}

/// Applies `h <- W h` until the smoothing decelerates below `a_hat` or
/// `t_max` steps have run.
///
/// The velocity of step t is `v(t) = (h(t) - h(t-1))^T 1` (per-column sums of
/// the change); the acceleration `a(t) = ||v(t) - v(t-1)||_inf` is defined
/// from t = 2. Iteration stops at the smallest t >= 2 with `a(t) <= a_hat`.
/// `a_hat = 0` therefore runs all `t_max` steps unless the embedding reaches
/// an exact fixed point.
pub fn power_iterate(
    w: &Matrix,
    h0: &Matrix,
    a_hat: f64,
    t_max: usize,
) -> Result<PowerIterationResult> {
    let n = w.rows();
    if w.cols() != n {
        return Err(Error::invalid_input(format!(
            "transition matrix must be square, got {}x{}",
            w.rows(),
            w.cols()
        )));
    }
    if h0.rows() != n {
        return Err(Error::invalid_input(format!(
            "embedding has {} rows but the transition matrix is {n}x{n}",
            h0.rows()
        )));
    }
    if t_max == 0 {
        return Err(Error::invalid_input("t_max must be at least 1"));
    }
    if !(a_hat >= 0.0 && a_hat.is_finite()) {
        return Err(Error::invalid_input("a_hat must be finite and non-negative"));
    }
    for i in 0..n {
        let row = w.row(i);
        if row.iter().any(|&v| v < -1e-12) {
            return Err(Error::invalid_input(format!("transition row {i} has negative entries")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-8 {
            return Err(Error::invalid_input(format!(
                "transition row {i} sums to {sum}, not 1 (within 1e-8)"
            )));
        }
    }

    let mut prev = h0.clone();
    let mut velocity_prev: Option<Vec<f64>> = None;
    let mut accelerations = Vec::new();

    for t in 1..=t_max {
        let next = w.matmul(&prev);
        let velocity = next.sub(&prev).column_sums();
        if let Some(vp) = &velocity_prev {
            let accel = velocity
                .iter()
                .zip(vp)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            accelerations.push(accel);
            if accel <= a_hat {
                return Ok(PowerIterationResult { z: next, iterations: t, accelerations });
            }
        }
        velocity_prev = Some(velocity);
        prev = next;
    }

    Ok(PowerIterationResult { z: prev, iterations: t_max, accelerations })
}

/// The symmetric matrix sharing `W`'s spectrum, plus the degree vector when
/// it can be recovered.
///
/// A transition matrix `W = D^-1 A` built from a symmetric affinity with unit
/// diagonal satisfies `w_ii = 1/d_i`, so `D` is recoverable from the diagonal
/// and `M = D^(1/2) W D^(-1/2)` is symmetric with the same eigenvalues; `W`'s
/// eigenvectors are `D^(-1/2)` times `M`'s. When the diagonal is unusable or
/// the recovered form is not symmetric, fall back to the plain symmetric part
/// `(W + W^T)/2`.
fn symmetric_form(w: &Matrix) -> (Matrix, Option<Vec<f64>>) {
    let n = w.rows();
    let diag_ok = (0..n).all(|i| w.get(i, i) > 1e-300);
    if diag_ok {
        let d: Vec<f64> = (0..n).map(|i| 1.0 / w.get(i, i)).collect();
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, w.get(i, j) * (d[i] / d[j]).sqrt());
            }
        }
        let mut asym = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                asym = asym.max((m.get(i, j) - m.get(j, i)).abs());
            }
        }
        if asym <= 1e-8 * m.max_abs().max(1.0) {
            // Kill the residual float asymmetry before handing to the solver.
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = 0.5 * (m.get(i, j) + m.get(j, i));
                    m.set(i, j, v);
                    m.set(j, i, v);
                }
            }
            return (m, Some(d));
        }
    }
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, 0.5 * (w.get(i, j) + w.get(j, i)));
        }
    }
    (m, None)
}

/// Orthonormalizes the columns of `m` in place (modified Gram-Schmidt, two
/// passes for stability).
fn orthonormalize_columns(m: &mut Matrix) {
    let (n, k) = m.shape();
    for c in 0..k {
        let mut col = m.col(c);
        for _ in 0..2 {
            for prev in 0..c {
                let pcol = m.col(prev);
                let dot: f64 = col.iter().zip(&pcol).map(|(a, b)| a * b).sum();
                for i in 0..n {
                    col[i] -= dot * pcol[i];
                }
            }
        }
        let norm: f64 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut col {
                *v /= norm;
            }
        }
        m.set_col(c, &col);
    }
}

/// Fraction of each column of `z` lying in the span of `w`'s top-`k`
/// eigenvectors (the invariant subspace power iteration converges to).
///
/// Returns one energy in `[0, 1]` per column; an all-zero column counts as
/// fully contained. The oracle takes a full eigendecomposition of the
/// symmetrized operator, so this is a verification tool, not a training-path
/// operation.
pub fn subspace_energy(z: &Matrix, w: &Matrix, k: usize) -> Result<Vec<f64>> {
    let n = w.rows();
    if w.cols() != n {
        return Err(Error::invalid_input("transition matrix must be square"));
    }
    if z.rows() != n {
        return Err(Error::invalid_input(format!(
            "embedding has {} rows but the transition matrix is {n}x{n}",
            z.rows()
        )));
    }
    if k == 0 || k > n {
        return Err(Error::invalid_input(format!("k must be in 1..={n}, got {k}")));
    }

    let (m, degrees) = symmetric_form(w);
    let eig = sym_eig(&m)?;

    // Top-k eigenvectors (largest eigenvalues sit at the back), mapped to
    // eigenvectors of W and orthonormalized to give a projector basis.
    let mut basis = Matrix::zeros(n, k);
    for c in 0..k {
        let mut col = eig.vectors.col(n - 1 - c);
        if let Some(d) = &degrees {
            for (i, v) in col.iter_mut().enumerate() {
                *v /= d[i].sqrt();
            }
        }
        basis.set_col(c, &col);
    }
    orthonormalize_columns(&mut basis);

    let mut energies = Vec::with_capacity(z.cols());
    for c in 0..z.cols() {
        let col = z.col(c);
        let total: f64 = col.iter().map(|v| v * v).sum();
        if total == 0.0 {
            energies.push(1.0);
            continue;
        }
        let mut captured = 0.0;
        for b in 0..k {
            let bcol = basis.col(b);
            let dot: f64 = col.iter().zip(&bcol).map(|(a, b)| a * b).sum();
            captured += dot * dot;
        }
        energies.push((captured / total).min(1.0));
    }
    Ok(energies)
}

/// Normalized-cut spectral embedding: the `k` eigenvectors of the symmetrized
/// Laplacian `I - M` with the smallest eigenvalues, as orthonormal columns.
/// Cluster by running Kmeans on the rows.
///
/// Bounded to 2000 samples; the full Jacobi eigendecomposition behind it is
/// cubic and meant for baselines and verification only.
pub fn ncut_baseline(w: &Matrix, k: usize) -> Result<Matrix> {
    let n = w.rows();
    if w.cols() != n {
        return Err(Error::invalid_input("transition matrix must be square"));
    }
    if k == 0 || k >= n {
        return Err(Error::invalid_input(format!(
            "cluster count must satisfy 1 <= k < n = {n}, got {k}"
        )));
    }
    if n > 2000 {
        return Err(Error::invalid_input(format!(
            "ncut baseline is limited to 2000 samples (full eigendecomposition), got {n}"
        )));
    }

    let (m, _) = symmetric_form(w);
    let mut lap = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            lap.set(i, j, id - m.get(i, j));
        }
    }
    let eig = sym_eig(&lap)?;

    let mut out = Matrix::zeros(n, k);
    for c in 0..k {
        out.set_col(c, &eig.vectors.col(c));
    }
    Ok(out)
}
