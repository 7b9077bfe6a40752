use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Full eigendecomposition of a symmetric matrix.
///
/// `values` are sorted ascending; `vectors` holds the matching eigenvectors
/// as columns, each normalized and sign-fixed so its largest-magnitude
/// component is positive. Ties in eigenvalue keep the pre-sort column order,
/// so repeated eigenvalues come out in a reproducible basis: Jacobi performs
/// no rotations on an already-diagonal matrix, which leaves exact ties with
/// axis-aligned eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition via cyclic Jacobi rotations.
///
/// Converged when the off-diagonal Frobenius norm falls below
/// `1e-12 * max(1, ||S||_F)`; the scale factor keeps the criterion reachable
/// for large-norm matrices, where an absolute 1e-12 sits below what f64
/// rounding can deliver. Fails with `NumericalFailure` after 100 sweeps.
pub fn sym_eig(s: &Matrix) -> Result<EigenDecomposition> {
    if s.rows() != s.cols() {
        return Err(Error::invalid_input(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    let n = s.rows();
    if n == 0 {
        return Err(Error::invalid_input("eigendecomposition of an empty matrix"));
    }
    if !s.is_finite() {
        return Err(Error::invalid_input("matrix contains non-finite entries"));
    }
    let sym_tol = 1e-10 * s.max_abs().max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (s.get(i, j) - s.get(j, i)).abs() > sym_tol {
                return Err(Error::invalid_input(format!(
                    "matrix is not symmetric: |S[{i}][{j}] - S[{j}][{i}]| = {:e}",
                    (s.get(i, j) - s.get(j, i)).abs()
                )));
            }
        }
    }

    // Work on a symmetrized copy so sub-tolerance input asymmetry cannot bias
    // the rotations.
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (s.get(i, j) + s.get(j, i));
        }
    }

    let conv_tol = 1e-12 * s.frobenius_norm().max(1.0);

    let mut v = Matrix::identity(n);
    let mut d: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let mut b = d.clone();
    let mut z = vec![0.0; n];

    let mut converged = false;
    for sweep in 0..MAX_SWEEPS {
        let mut off_sq = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off_sq += 2.0 * a[p * n + q] * a[p * n + q];
            }
        }
        if off_sq.sqrt() < conv_tol {
            converged = true;
            break;
        }

        // Threshold schedule from the classic cyclic Jacobi: rotate on
        // everything after the first few sweeps.
        let mut abs_sum = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                abs_sum += a[p * n + q].abs();
            }
        }
        let thresh = if sweep < 3 { 0.2 * abs_sum / (n * n) as f64 } else { 0.0 };

        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let g = 100.0 * apq.abs();
                // Late sweeps: zero an element outright once it no longer
                // perturbs either diagonal entry at f64 precision.
                if sweep > 3 && d[p].abs() + g == d[p].abs() && d[q].abs() + g == d[q].abs() {
                    a[p * n + q] = 0.0;
                    continue;
                }
                if apq.abs() <= thresh {
                    continue;
                }

                let h = d[q] - d[p];
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let mut t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        t = -t;
                    }
                    t
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s_rot = t * c;
                let tau = s_rot / (1.0 + c);
                let h = t * apq;

                z[p] -= h;
                z[q] += h;
                d[p] -= h;
                d[q] += h;
                a[p * n + q] = 0.0;

                let rotate = |a: &mut [f64], i: usize, j: usize, k: usize, l: usize| {
                    let g = a[i * n + j];
                    let h = a[k * n + l];
                    a[i * n + j] = g - s_rot * (h + g * tau);
                    a[k * n + l] = h + s_rot * (g - h * tau);
                };
                for j in 0..p {
                    rotate(&mut a, j, p, j, q);
                }
                for j in (p + 1)..q {
                    rotate(&mut a, p, j, j, q);
                }
                for j in (q + 1)..n {
                    rotate(&mut a, p, j, q, j);
                }
                for r in 0..n {
                    let gp = v.get(r, p);
                    let gq = v.get(r, q);
                    v.set(r, p, gp - s_rot * (gq + gp * tau));
                    v.set(r, q, gq + s_rot * (gp - gq * tau));
                }
            }
        }

        for i in 0..n {
            b[i] += z[i];
            d[i] = b[i];
            z[i] = 0.0;
        }
    }

    if !converged {
        let mut off_sq = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off_sq += 2.0 * a[p * n + q] * a[p * n + q];
            }
        }
        return Err(Error::numerical(format!(
            "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps \
             (off-diagonal norm {:e}, tolerance {:e})",
            off_sq.sqrt(),
            conv_tol
        )));
    }

    // Stable ascending sort on (eigenvalue, original index).
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).expect("finite eigenvalues").then(i.cmp(&j)));

    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: Vec<f64> = (0..n).map(|r| v.get(r, src)).collect();
        let mut arg = 0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[arg].abs() {
                arg = i;
            }
        }
        if col[arg] < 0.0 {
            for x in &mut col {
                *x = -*x;
            }
        }
        vectors.set_col(dst, &col);
    }

    Ok(EigenDecomposition { values, vectors })
}
