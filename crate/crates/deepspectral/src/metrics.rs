//! Clustering evaluation: optimal-matching accuracy, normalized mutual
//! information, assignment-churn convergence, and quantized entropy.
//!
//! Cluster IDs are arbitrary, so every comparison here first reduces to a
//! contingency table and, where a one-to-one matching is needed, solves it
//! exactly with the Hungarian assignment from `numerics`.

use crate::error::{Error, Result};
use crate::numerics::{hungarian, Matrix};

/// Evaluation summary for one clustering against reference labels.
#[derive(Debug, Clone)]
pub struct EvalReport {
    /// Optimal-matching accuracy in `[0, 1]`.
    pub acc: f64,
    /// Normalized mutual information in `[0, 1]`.
    pub nmi: f64,
    /// Contingency counts, true clusters by predicted clusters.
    pub confusion: Vec<Vec<usize>>,
    /// Fraction of samples whose aligned assignment differs from the
    /// previous iteration; 0 for one-shot evaluations.
    pub changed_fraction: f64,
}

impl EvalReport {
    /// Evaluates `preds` against `labels`, measuring churn against
    /// `previous` when given.
    pub fn compute(labels: &[usize], preds: &[usize], previous: Option<&[usize]>) -> Result<Self> {
        let changed = match previous {
            Some(prev) => changed_fraction(prev, preds)?,
            None => 0.0,
        };
        Ok(EvalReport {
            acc: acc(labels, preds)?,
            nmi: nmi(labels, preds)?,
            confusion: confusion(labels, preds)?,
            changed_fraction: changed,
        })
    }

    /// Flat `key = value` block, one line per field, confusion rows last.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("acc = {}\n", self.acc));
        out.push_str(&format!("nmi = {}\n", self.nmi));
        out.push_str(&format!("changed_fraction = {}\n", self.changed_fraction));
        for (i, row) in self.confusion.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            out.push_str(&format!("confusion_row_{i} = {}\n", cells.join(",")));
        }
        out
    }

    /// Header matching [`EvalReport::to_csv_row`].
    pub fn csv_header() -> &'static str {
        "acc,nmi,changed_fraction"
    }

    /// Scalar fields as one CSV row.
    pub fn to_csv_row(&self) -> String {
        format!("{},{},{}", self.acc, self.nmi, self.changed_fraction)
    }
}

fn check_lengths(a: &[usize], b: &[usize]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::invalid_input(format!(
            "label sequences have different lengths: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::invalid_input("cannot evaluate empty label sequences"));
    }
    Ok(())
}

/// Contingency table of `labels` (rows) against `preds` (columns), sized by
/// the largest ID seen in each.
pub fn confusion(labels: &[usize], preds: &[usize]) -> Result<Vec<Vec<usize>>> {
    check_lengths(labels, preds)?;
    let k_true = labels.iter().max().unwrap() + 1;
    let k_pred = preds.iter().max().unwrap() + 1;
    let mut table = vec![vec![0usize; k_pred]; k_true];
    for (&l, &p) in labels.iter().zip(preds) {
        table[l][p] += 1;
    }
    Ok(table)
}

/// Best matched count over one-to-one cluster matchings, found by solving
/// the assignment problem on the negated (square-padded) contingency table.
fn optimal_match_count(table: &[Vec<usize>]) -> usize {
    let rows = table.len();
    let cols = table[0].len();
    let side = rows.max(cols);
    let cost = Matrix::from_fn(side, side, |i, j| {
        if i < rows && j < cols {
            -(table[i][j] as f64)
        } else {
            0.0
        }
    });
    let perm = hungarian(&cost).expect("finite square cost");
    let mut matched = 0;
    for (i, &j) in perm.iter().enumerate() {
        if i < rows && j < cols {
            matched += table[i][j];
        }
    }
    matched
}

/// Clustering accuracy: the fraction of samples explained by the best
/// one-to-one matching between predicted and true clusters.
pub fn acc(labels: &[usize], preds: &[usize]) -> Result<f64> {
    let table = confusion(labels, preds)?;
    Ok(optimal_match_count(&table) as f64 / labels.len() as f64)
}

/// Normalized mutual information with the geometric-mean normalizer,
/// `I(U;V) / sqrt(H(U) H(V))`, natural logarithms.
///
/// Identical partitions score 1 even when both collapse to a single cluster;
/// if only one side is a single cluster the mutual information is zero and
/// the score is defined as 0.
pub fn nmi(labels: &[usize], preds: &[usize]) -> Result<f64> {
    let table = confusion(labels, preds)?;
    let n = labels.len() as f64;

    let row_sums: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<usize> =
        (0..table[0].len()).map(|c| table.iter().map(|r| r[c]).sum()).collect();

    // Identical as partitions: every non-empty row meets exactly one
    // non-empty column and vice versa.
    let identical = table.iter().enumerate().all(|(i, row)| {
        row.iter().enumerate().all(|(j, &cell)| {
            cell == 0 || (cell == row_sums[i] && cell == col_sums[j])
        })
    });
    if identical {
        return Ok(1.0);
    }

    let entropy = |sums: &[usize]| -> f64 {
        sums.iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let h_u = entropy(&row_sums);
    let h_v = entropy(&col_sums);
    if h_u == 0.0 || h_v == 0.0 {
        // One side is a single cluster (and the partitions differ), so the
        // mutual information is exactly zero.
        return Ok(0.0);
    }

    let mut mi = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &cell) in row.iter().enumerate() {
            if cell > 0 {
                let p = cell as f64 / n;
                mi += p * ((n * cell as f64) / (row_sums[i] as f64 * col_sums[j] as f64)).ln();
            }
        }
    }
    Ok((mi / (h_u * h_v).sqrt()).max(0.0))
}

/// Fraction of samples whose cluster changed between two assignments, after
/// aligning cluster IDs with the best one-to-one matching. Pure relabelings
/// therefore score 0.
pub fn changed_fraction(prev: &[usize], curr: &[usize]) -> Result<f64> {
    let table = confusion(prev, curr)?;
    let matched = optimal_match_count(&table);
    Ok((prev.len() - matched) as f64 / prev.len() as f64)
}

/// Plug-in Shannon entropies of two columns quantized on a shared
/// equal-width grid built from their pooled range. Returns `(Hx, Hy)` in
/// nats; a constant pool yields `(0, 0)`.
pub fn entropy_compare(x_col: &[f64], y_col: &[f64], bins: usize) -> Result<(f64, f64)> {
    if bins < 2 {
        return Err(Error::invalid_input(format!("need at least 2 bins, got {bins}")));
    }
    if x_col.is_empty() || y_col.is_empty() {
        return Err(Error::invalid_input("cannot quantize empty columns"));
    }
    if x_col.iter().chain(y_col).any(|v| !v.is_finite()) {
        return Err(Error::invalid_input("columns contain non-finite values"));
    }

    let lo = x_col.iter().chain(y_col).cloned().fold(f64::INFINITY, f64::min);
    let hi = x_col.iter().chain(y_col).cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Ok((0.0, 0.0));
    }
    let step = (hi - lo) / bins as f64;

    let quantized_entropy = |col: &[f64]| -> f64 {
        let mut counts = vec![0usize; bins];
        for &v in col {
            let bin = (((v - lo) / step) as usize).min(bins - 1);
            counts[bin] += 1;
        }
        let n = col.len() as f64;
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    Ok((quantized_entropy(x_col), quantized_entropy(y_col)))
}
