use crate::error::{Error, Result};
use crate::numerics::{sym_eig, Matrix};

/// Projects rows of `x` onto their top principal directions.
///
/// Columns of the result are ordered by decreasing explained variance and
/// inherit the eigensolver's sign convention, so the projection is
/// deterministic. If the data has numerical rank below `dims` the output is
/// reduced to the rank (with a warning) rather than padded with noise
/// directions.
pub fn pca_project(x: &Matrix, dims: usize) -> Result<Matrix> {
    let (n, p) = x.shape();
    if dims == 0 {
        return Err(Error::invalid_input("pca dims must be at least 1"));
    }
    if dims > n.min(p) {
        return Err(Error::invalid_input(format!(
            "pca dims {dims} exceeds min(samples, features) = {}",
            n.min(p)
        )));
    }

    let mut centered = x.clone();
    for j in 0..p {
        let mean = (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64;
        for i in 0..n {
            centered.set(i, j, x.get(i, j) - mean);
        }
    }

    let denom = (n.saturating_sub(1)).max(1) as f64;
    let cov = centered.matmul_tn(&centered).scale(1.0 / denom);
    let eig = sym_eig(&cov)?;

    let lam_max = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    let rank = eig.values.iter().filter(|&&l| l > lam_max * 1e-12 && l > 0.0).count();
    let effective = dims.min(rank);
    if effective < dims {
        log::warn!(
            "pca: requested {dims} dims but data rank is {rank}; projecting to {effective}"
        );
    }

    // Eigenvalues come back ascending; take the top `effective` in
    // descending order of explained variance.
    let mut basis = Matrix::zeros(p, effective);
    for c in 0..effective {
        basis.set_col(c, &eig.vectors.col(p - 1 - c));
    }
    Ok(centered.matmul(&basis))
}
