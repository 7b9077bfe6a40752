//! On-disk layout of a finished run: model checkpoint, centroids, rotation,
//! assignments, per-iteration diagnostics, config, and evaluation report.
//!
//! Everything numeric is written with Rust's shortest-round-trip float
//! formatting, so a save/load cycle reproduces values bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use crate::autoencoder::{load_model, save_model, MlpModel};
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::numerics::Matrix;
use crate::pipeline::config::RunConfig;

/// Diagnostics captured once per outer iteration.
///
/// Fields that do not apply to a run variant (no smoothing, no rotation) are
/// stored as NaN and survive a CSV round trip that way.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    /// 1-based outer iteration number.
    pub iteration: usize,
    /// Smoothing steps actually taken this iteration (0 when not smoothing).
    pub power_iterations: usize,
    /// Within-cluster squared-distance objective of the chunk Kmeans.
    pub kmeans_objective: f64,
    /// |trace of the rotated scatter - kmeans objective|.
    pub trace_residual: f64,
    /// Frobenius distance of the rotation from orthogonality.
    pub rotation_orthogonality: f64,
    /// Largest pairwise-distance drift introduced by the rotation.
    pub max_isometry_deviation: f64,
    /// Regression loss over the leading target columns, before the update.
    pub spectral_loss: f64,
    /// Regression loss over the final target column, before the update.
    pub greedy_loss: f64,
    /// Loss over all target columns, before the update.
    pub joint_loss: f64,
    /// Entropy of the rotated embedding's final coordinate.
    pub entropy_x: f64,
    /// Entropy of the final target coordinate (the collapsed version).
    pub entropy_y: f64,
    /// Loss of the last mini-batch fed to the optimizer this iteration.
    pub train_loss: f64,
    /// Fraction of samples whose cluster changed since the last iteration,
    /// after optimally aligning the two labelings.
    pub changed_fraction: f64,
    /// Clustering accuracy against ground truth, when labels are known.
    pub acc: Option<f64>,
    /// Normalized mutual information against ground truth, when known.
    pub nmi: Option<f64>,
}

impl IterationRecord {
    pub fn csv_header() -> &'static str {
        "iteration,power_iterations,kmeans_objective,trace_residual,\
         rotation_orthogonality,max_isometry_deviation,spectral_loss,\
         greedy_loss,joint_loss,entropy_x,entropy_y,train_loss,\
         changed_fraction,acc,nmi"
    }

    pub fn to_csv_row(&self) -> String {
        let opt = |v: Option<f64>| match v {
            Some(x) => x.to_string(),
            None => String::new(),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.power_iterations,
            self.kmeans_objective,
            self.trace_residual,
            self.rotation_orthogonality,
            self.max_isometry_deviation,
            self.spectral_loss,
            self.greedy_loss,
            self.joint_loss,
            self.entropy_x,
            self.entropy_y,
            self.train_loss,
            self.changed_fraction,
            opt(self.acc),
            opt(self.nmi),
        )
    }

    fn from_csv_row(row: &str, lineno: usize) -> Result<IterationRecord> {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 15 {
            return Err(Error::format(format!(
                "iterations line {lineno}: expected 15 fields, got {}",
                fields.len()
            )));
        }
        fn int(s: &str, lineno: usize) -> Result<usize> {
            s.trim().parse().map_err(|_| {
                Error::format(format!("iterations line {lineno}: bad integer `{s}`"))
            })
        }
        fn num(s: &str, lineno: usize) -> Result<f64> {
            s.trim().parse().map_err(|_| {
                Error::format(format!("iterations line {lineno}: bad number `{s}`"))
            })
        }
        fn opt(s: &str, lineno: usize) -> Result<Option<f64>> {
            if s.trim().is_empty() {
                Ok(None)
            } else {
                num(s, lineno).map(Some)
            }
        }
        Ok(IterationRecord {
            iteration: int(fields[0], lineno)?,
            power_iterations: int(fields[1], lineno)?,
            kmeans_objective: num(fields[2], lineno)?,
            trace_residual: num(fields[3], lineno)?,
            rotation_orthogonality: num(fields[4], lineno)?,
            max_isometry_deviation: num(fields[5], lineno)?,
            spectral_loss: num(fields[6], lineno)?,
            greedy_loss: num(fields[7], lineno)?,
            joint_loss: num(fields[8], lineno)?,
            entropy_x: num(fields[9], lineno)?,
            entropy_y: num(fields[10], lineno)?,
            train_loss: num(fields[11], lineno)?,
            changed_fraction: num(fields[12], lineno)?,
            acc: opt(fields[13], lineno)?,
            nmi: opt(fields[14], lineno)?,
        })
    }
}

/// Everything a finished clustering run produces.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    /// Trained model (encoder plus decoder).
    pub model: MlpModel,
    /// Cluster centers in the rotated embedding space, one row per cluster.
    /// New samples are assigned to the nearest of these rows.
    pub centroids: Matrix,
    /// Rotation applied to embeddings before measuring distances. Identity
    /// for run variants that never rotate.
    pub rotation: Matrix,
    /// Final cluster of every dataset row.
    pub assignments: Vec<usize>,
    /// One record per outer iteration, in order.
    pub iterations: Vec<IterationRecord>,
    /// Whether the run stopped because assignments stabilized, as opposed to
    /// hitting the iteration cap.
    pub converged: bool,
    /// Evaluation against ground truth, when the dataset had labels.
    pub report: Option<EvalReport>,
}

const CHECKPOINT_FILE: &str = "checkpoint.dscm";
const CENTROIDS_FILE: &str = "centroids.csv";
const ROTATION_FILE: &str = "rotation.csv";
const ASSIGNMENTS_FILE: &str = "assignments.csv";
const ITERATIONS_FILE: &str = "iterations.csv";
const CONFIG_FILE: &str = "config.txt";
const REPORT_TEXT_FILE: &str = "report.txt";
const REPORT_CSV_FILE: &str = "report.csv";

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::io(path, source))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::io(path, source))
}

/// Headerless CSV of raw matrix entries; exact because of shortest
/// round-trip formatting.
fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_file(path, &out)
}

fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let text = read_file(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let row = row.map_err(|_| {
            Error::format(format!(
                "{}: line {} is not numeric",
                path.display(),
                idx + 1
            ))
        })?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::format(format!(
                    "{}: line {} has {} fields, expected {}",
                    path.display(),
                    idx + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::format(format!("{}: empty matrix", path.display())));
    }
    Ok(Matrix::from_rows(&rows))
}

impl RunArtifacts {
    /// Writes the run to `dir`, creating it if needed. Existing files from a
    /// previous run in the same directory are overwritten.
    pub fn save(&self, cfg: &RunConfig, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|source| Error::io(dir, source))?;
        save_model(&self.model, &dir.join(CHECKPOINT_FILE))?;
        write_matrix_csv(&dir.join(CENTROIDS_FILE), &self.centroids)?;
        write_matrix_csv(&dir.join(ROTATION_FILE), &self.rotation)?;

        let mut assignments = String::from("index,cluster\n");
        for (i, &c) in self.assignments.iter().enumerate() {
            assignments.push_str(&format!("{i},{c}\n"));
        }
        write_file(&dir.join(ASSIGNMENTS_FILE), &assignments)?;

        let mut iterations = String::from(IterationRecord::csv_header());
        iterations.push('\n');
        for rec in &self.iterations {
            iterations.push_str(&rec.to_csv_row());
            iterations.push('\n');
        }
        write_file(&dir.join(ITERATIONS_FILE), &iterations)?;

        write_file(&dir.join(CONFIG_FILE), &cfg.to_text())?;

        let mut text = String::new();
        text.push_str(&format!("converged = {}\n", self.converged));
        text.push_str(&format!("iterations = {}\n", self.iterations.len()));
        match &self.report {
            Some(report) => {
                text.push('\n');
                text.push_str(&report.to_text());
            }
            None => text.push_str("\nno ground-truth labels; metrics omitted\n"),
        }
        write_file(&dir.join(REPORT_TEXT_FILE), &text)?;
        if let Some(report) = &self.report {
            let csv = format!("{}\n{}\n", EvalReport::csv_header(), report.to_csv_row());
            write_file(&dir.join(REPORT_CSV_FILE), &csv)?;
        }
        Ok(())
    }

    /// Loads a run saved by [`RunArtifacts::save`]. The evaluation report is
    /// not reconstructed; everything needed to assign new samples is.
    pub fn load(dir: &Path) -> Result<(RunArtifacts, RunConfig)> {
        let model = load_model(&dir.join(CHECKPOINT_FILE))?;
        let centroids = read_matrix_csv(&dir.join(CENTROIDS_FILE))?;
        let rotation = read_matrix_csv(&dir.join(ROTATION_FILE))?;
        let cfg = RunConfig::parse(&read_file(&dir.join(CONFIG_FILE))?)?;

        let d = model.embedding_width();
        if centroids.cols() != d {
            return Err(Error::format(format!(
                "centroids are {} wide but the model embeds into {} dimensions",
                centroids.cols(),
                d
            )));
        }
        if rotation.rows() != d || rotation.cols() != d {
            return Err(Error::format(format!(
                "rotation is {}x{} but the embedding is {d}-dimensional",
                rotation.rows(),
                rotation.cols()
            )));
        }

        let assignments_text = read_file(&dir.join(ASSIGNMENTS_FILE))?;
        let mut assignments = Vec::new();
        for (idx, line) in assignments_text.lines().enumerate() {
            if idx == 0 {
                if line.trim() != "index,cluster" {
                    return Err(Error::format(format!(
                        "assignments: unexpected header `{line}`"
                    )));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (index, cluster) = line.split_once(',').ok_or_else(|| {
                Error::format(format!("assignments line {}: missing comma", idx + 1))
            })?;
            let index: usize = index.trim().parse().map_err(|_| {
                Error::format(format!("assignments line {}: bad index", idx + 1))
            })?;
            if index != assignments.len() {
                return Err(Error::format(format!(
                    "assignments line {}: indices must be consecutive from 0",
                    idx + 1
                )));
            }
            let cluster: usize = cluster.trim().parse().map_err(|_| {
                Error::format(format!("assignments line {}: bad cluster", idx + 1))
            })?;
            if cluster >= centroids.rows() {
                return Err(Error::format(format!(
                    "assignments line {}: cluster {cluster} out of range",
                    idx + 1
                )));
            }
            assignments.push(cluster);
        }

        let iterations_text = read_file(&dir.join(ITERATIONS_FILE))?;
        let mut iterations = Vec::new();
        for (idx, line) in iterations_text.lines().enumerate() {
            if idx == 0 {
                // Header spacing is cosmetic; compare without it.
                let want: String = IterationRecord::csv_header()
                    .chars()
                    .filter(|c| !c.is_whitespace())
                    .collect();
                if line.trim() != want {
                    return Err(Error::format(format!(
                        "iterations: unexpected header `{line}`"
                    )));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            iterations.push(IterationRecord::from_csv_row(line, idx + 1)?);
        }

        let report_text = read_file(&dir.join(REPORT_TEXT_FILE))?;
        let converged = report_text
            .lines()
            .find_map(|l| l.strip_prefix("converged = "))
            .map(|v| v.trim() == "true")
            .ok_or_else(|| Error::format("report.txt is missing the converged line"))?;

        Ok((
            RunArtifacts {
                model,
                centroids,
                rotation,
                assignments,
                iterations,
                converged,
                report: None,
            },
            cfg,
        ))
    }
}

/// Writes PCA-projected embeddings with cluster and label columns.
pub(crate) fn write_embedding_csv(
    path: &Path,
    projected: &Matrix,
    assignments: Option<&[usize]>,
    labels: Option<&[usize]>,
) -> Result<()> {
    let dims = projected.cols();
    let mut header: Vec<String> = (1..=dims).map(|d| format!("pc{d}")).collect();
    if assignments.is_some() {
        header.push("assigned_cluster".into());
    }
    if labels.is_some() {
        header.push("true_label".into());
    }
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..projected.rows() {
        let mut fields: Vec<String> =
            projected.row(i).iter().map(|v| v.to_string()).collect();
        if let Some(a) = assignments {
            fields.push(a[i].to_string());
        }
        if let Some(l) = labels {
            fields.push(l[i].to_string());
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    write_file(path, &out)
}

/// Where a pretrained checkpoint lives inside an artifacts directory.
pub fn checkpoint_path(dir: &Path) -> PathBuf {
    dir.join(CHECKPOINT_FILE)
}
