use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Minimum-cost perfect assignment on a square cost matrix.
///
/// Returns `perm` with `perm[row] = column`. Kuhn-Munkres with row/column
/// potentials and shortest augmenting paths, O(n^3). Deterministic: rows are
/// inserted in order and ties fall to the lowest-indexed column, so equal-cost
/// optima always resolve the same way.
pub fn hungarian(cost: &Matrix) -> Result<Vec<usize>> {
    if cost.rows() != cost.cols() {
        return Err(Error::invalid_input(format!(
            "assignment needs a square cost matrix, got {}x{}",
            cost.rows(),
            cost.cols()
        )));
    }
    let n = cost.rows();
    if n == 0 {
        return Err(Error::invalid_input("assignment on an empty cost matrix"));
    }
    if !cost.is_finite() {
        return Err(Error::invalid_input("cost matrix contains non-finite entries"));
    }

    // 1-indexed internals; index 0 is the virtual unmatched column.
    let mut u = vec![0.0_f64; n + 1];
    let mut v = vec![0.0_f64; n + 1];
    let mut p = vec![0usize; n + 1]; // p[j] = row currently matched to column j
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            perm[p[j] - 1] = j - 1;
        }
    }
    Ok(perm)
}
