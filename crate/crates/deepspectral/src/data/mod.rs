//! Dataset loading, synthesis, and splitting.
//!
//! All loaders produce the same [`Dataset`] shape: an N x P feature matrix
//! plus optional integer labels compacted to `0..K`. CSV features are
//! z-scored per column on load; IDX images are scaled to `[0, 1]`.

mod csv;
mod idx;
mod split;
mod synth;

pub use csv::{load_csv, save_csv};
pub use idx::load_idx;
pub use split::split;
pub use synth::{synth_blobs, synth_circles};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// A loaded dataset: features, optional ground-truth labels, and a short
/// provenance string for reports.
///
/// Labels are always compacted to the range `0..k_true` preserving the order
/// of the original values, so every class index is non-empty. Accuracy and
/// mutual-information metrics are invariant under that relabeling.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Option<Vec<usize>>,
    pub name: String,
    pub source: String,
}

impl Dataset {
    /// Builds a dataset, compacting raw integer labels to `0..K`.
    pub fn new(
        features: Matrix,
        raw_labels: Option<Vec<i64>>,
        name: impl Into<String>,
        source: impl Into<String>,
    ) -> Result<Self> {
        if features.rows() == 0 || features.cols() == 0 {
            return Err(Error::invalid_input("dataset must have at least one row and column"));
        }
        if !features.is_finite() {
            return Err(Error::invalid_input("dataset features contain non-finite values"));
        }
        let labels = match raw_labels {
            None => None,
            Some(raw) => {
                if raw.len() != features.rows() {
                    return Err(Error::invalid_input(format!(
                        "label count {} does not match sample count {}",
                        raw.len(),
                        features.rows()
                    )));
                }
                let mut distinct: Vec<i64> = raw.clone();
                distinct.sort_unstable();
                distinct.dedup();
                Some(
                    raw.iter()
                        .map(|v| distinct.binary_search(v).expect("value present") as usize)
                        .collect(),
                )
            }
        };
        Ok(Dataset { features, labels, name: name.into(), source: source.into() })
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn p(&self) -> usize {
        self.features.cols()
    }

    /// Number of distinct classes, when labels are known.
    pub fn k_true(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| l.iter().max().map_or(0, |m| m + 1))
    }

    /// Subset of the dataset at the given row indices, labels carried along
    /// (and re-compacted, since a subset can lose a class entirely).
    pub fn subset(&self, indices: &[usize], name_suffix: &str) -> Result<Dataset> {
        let features = self.features.take_rows(indices);
        let raw = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i] as i64).collect::<Vec<_>>());
        Dataset::new(features, raw, format!("{}{}", self.name, name_suffix), self.source.clone())
    }
}
