use std::fmt::Write as _;
use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Loads a numeric CSV into a dataset, z-scoring every feature column.
///
/// A header row is auto-detected: if any cell of the first row fails to parse
/// as a number, the row is treated as column names. `label_column` selects
/// the ground-truth column by header name, or by zero-based index when the
/// file has no header. Constant feature columns standardize to all zeros
/// rather than dividing by zero.
pub fn load_csv(path: &Path, label_column: Option<&str>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<(usize, Vec<&str>)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        rows.push((lineno + 1, line.split(',').map(str::trim).collect()));
    }
    if rows.is_empty() {
        return Err(Error::format(format!("{}: no rows", path.display())));
    }

    let width = rows[0].1.len();
    let has_header = rows[0].1.iter().any(|cell| cell.parse::<f64>().is_err());
    let header: Option<Vec<String>> =
        has_header.then(|| rows[0].1.iter().map(|s| s.to_string()).collect());
    let data_rows = &rows[if has_header { 1 } else { 0 }..];
    if data_rows.is_empty() {
        return Err(Error::format(format!("{}: header but no data rows", path.display())));
    }

    let label_idx: Option<usize> = match label_column {
        None => None,
        Some(name) => match &header {
            Some(cols) => Some(cols.iter().position(|c| c == name).ok_or_else(|| {
                Error::format(format!(
                    "{}: no column named '{name}' in header [{}]",
                    path.display(),
                    cols.join(", ")
                ))
            })?),
            None => Some(name.parse::<usize>().map_err(|_| {
                Error::format(format!(
                    "{}: file has no header; label column must be a zero-based index, got '{name}'",
                    path.display()
                ))
            })?),
        },
    };
    if let Some(idx) = label_idx {
        if idx >= width {
            return Err(Error::format(format!(
                "{}: label column index {idx} out of range for {width} columns",
                path.display()
            )));
        }
    }

    let n = data_rows.len();
    let p = width - usize::from(label_idx.is_some());
    if p == 0 {
        return Err(Error::format(format!("{}: no feature columns", path.display())));
    }

    let mut features = Matrix::zeros(n, p);
    let mut raw_labels: Vec<i64> = Vec::new();
    for (r, (lineno, cells)) in data_rows.iter().enumerate() {
        if cells.len() != width {
            return Err(Error::format(format!(
                "{}: line {lineno} has {} fields, expected {width}",
                path.display(),
                cells.len()
            )));
        }
        let mut c = 0;
        for (j, cell) in cells.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                Error::format(format!(
                    "{}: line {lineno}, column {}: '{cell}' is not numeric",
                    path.display(),
                    j + 1
                ))
            })?;
            if !value.is_finite() {
                return Err(Error::format(format!(
                    "{}: line {lineno}, column {}: non-finite value",
                    path.display(),
                    j + 1
                )));
            }
            if Some(j) == label_idx {
                let rounded = value.round();
                if (value - rounded).abs() > 1e-9 {
                    return Err(Error::format(format!(
                        "{}: line {lineno}: label '{cell}' is not an integer",
                        path.display()
                    )));
                }
                raw_labels.push(rounded as i64);
            } else {
                features.set(r, c, value);
                c += 1;
            }
        }
    }

    standardize_columns(&mut features);

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".to_string());
    Dataset::new(
        features,
        label_idx.map(|_| raw_labels),
        name,
        path.display().to_string(),
    )
}

/// Z-scores each column in place: zero mean, unit variance (population
/// variance). A column whose spread is at rounding level is zeroed.
fn standardize_columns(features: &mut Matrix) {
    let (n, p) = features.shape();
    for j in 0..p {
        let mean = (0..n).map(|i| features.get(i, j)).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (features.get(i, j) - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        if std <= 1e-12 * (1.0 + mean.abs()) {
            for i in 0..n {
                features.set(i, j, 0.0);
            }
        } else {
            for i in 0..n {
                features.set(i, j, (features.get(i, j) - mean) / std);
            }
        }
    }
}

/// Writes a dataset as CSV: `feat_0..feat_{P-1}[,label]`, full f64 precision
/// (shortest round-trippable decimal form).
pub fn save_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    let p = ds.p();
    let mut header: Vec<String> = (0..p).map(|j| format!("feat_{j}")).collect();
    if ds.labels.is_some() {
        header.push("label".to_string());
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..ds.n() {
        for (j, v) in ds.features.row(i).iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        if let Some(labels) = &ds.labels {
            let _ = write!(out, ",{}", labels[i]);
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(dir: &tempfile::TempDir, name: &str, content: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::write(&path, content).unwrap();
        path
    }

    #[test]
    fn header_detected_and_label_column_extracted() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(&dir, "t.csv", "x,y,label\n1,10,0\n2,20,0\n3,30,1\n4,40,1\n");
        let ds = load_csv(&path, Some("label")).unwrap();
        assert_eq!(ds.features.shape(), (4, 2));
        assert_eq!(ds.labels, Some(vec![0, 0, 1, 1]));
        // z-scored: mean 0, unit variance
        for j in 0..2 {
            let col = ds.features.col(j);
            let mean: f64 = col.iter().sum::<f64>() / 4.0;
            let var: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn headerless_file_takes_label_index() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(&dir, "t.csv", "1,5,0\n2,6,1\n3,7,0\n");
        let ds = load_csv(&path, Some("2")).unwrap();
        assert_eq!(ds.features.shape(), (3, 2));
        assert_eq!(ds.labels, Some(vec![0, 1, 0]));
    }

    #[test]
    fn constant_column_becomes_zeros() {
        let dir = tempfile::tempdir().unwrap();
        // 0.1 sums are classic float residue bait; the guard must still
        // recognize the column as constant.
        let path = write_temp(&dir, "t.csv", "0.1,1\n0.1,2\n0.1,3\n");
        let ds = load_csv(&path, None).unwrap();
        assert_eq!(ds.features.col(0), vec![0.0, 0.0, 0.0]);
        assert!(ds.features.col(1).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn ragged_and_non_numeric_rows_are_format_errors() {
        let dir = tempfile::tempdir().unwrap();
        let ragged = write_temp(&dir, "r.csv", "1,2\n3\n");
        let err = load_csv(&ragged, None).unwrap_err();
        assert!(err.to_string().contains("line 2"), "got: {err}");

        let bad = write_temp(&dir, "b.csv", "1,2\n3,oops\n");
        let err = load_csv(&bad, None).unwrap_err();
        assert!(err.to_string().contains("not numeric"), "got: {err}");

        let nan = write_temp(&dir, "n.csv", "1,2\n3,nan\n");
        assert!(matches!(load_csv(&nan, None), Err(Error::Format(_))));
    }

    #[test]
    fn missing_label_column_is_reported_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(&dir, "t.csv", "a,b\n1,2\n");
        let err = load_csv(&path, Some("класс")).unwrap_err();
        assert!(err.to_string().contains("no column named"));
    }

    #[test]
    fn save_then_load_is_idempotent() {
        // Standardization is idempotent, so a saved standardized dataset
        // reloads to the same values.
        let dir = tempfile::tempdir().unwrap();
        let path = write_temp(&dir, "t.csv", "x,y,label\n1,9,0\n4,3,1\n2,5,1\n8,1,0\n");
        let ds = load_csv(&path, Some("label")).unwrap();

        let saved = dir.path().join("saved.csv");
        save_csv(&ds, &saved).unwrap();
        let ds2 = load_csv(&saved, Some("label")).unwrap();

        assert_eq!(ds.labels, ds2.labels);
        for i in 0..ds.n() {
            for j in 0..ds.p() {
                assert!(
                    (ds.features.get(i, j) - ds2.features.get(i, j)).abs() < 1e-12,
                    "drift at ({i},{j})"
                );
            }
        }
    }
}
