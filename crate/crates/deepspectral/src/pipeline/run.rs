//! End-to-end runs: pretraining, the alternating clustering loop, inference
//! on new samples, and embedding export.
//!
//! The clustering loop repeats four stages until assignments stabilize:
//! encode a chunk, smooth the embeddings over the chunk's affinity graph,
//! recompute cluster structure (Kmeans, rotation, regression targets), and
//! take optimizer steps pulling the encoder toward those targets. After each
//! iteration the full dataset is re-assigned and the run stops once fewer
//! than `convergence_threshold` of the samples switch clusters.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autoencoder::{
    init_model, pretrain, train_joint_step, AdamState, JointOptions, LossColumns,
    MlpModel, PretrainLog, PretrainOptions,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::build_affinity;
use crate::greedy::{
    assign_to_nearest, build_target, greedy_loss, joint_loss, kmeans, scatter_matrix,
    solve_rotation, spectral_loss, ClusterState, GreedyRotation,
};
use crate::metrics::{self, entropy_compare, EvalReport};
use crate::numerics::{pca_project, Matrix};
use crate::pipeline::artifacts::{
    write_embedding_csv, IterationRecord, RunArtifacts,
};
use crate::pipeline::config::RunConfig;
use crate::spectral::power_iterate;
use crate::{stream_seed, streams};

/// Histogram resolution for the per-iteration entropy diagnostics.
const ENTROPY_BINS: usize = 256;

/// How the clustering loop builds its regression targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LoopVariant {
    /// Smooth embeddings, rotate, collapse the last coordinate per cluster.
    Full,
    /// Regress straight onto the smoothed embeddings; cluster afterwards.
    SpectralOnly,
    /// Skip smoothing; rotate and collapse raw embeddings, train only the
    /// collapsed coordinate.
    GreedyOnly,
}

/// Initializes a model for `ds` and pretrains it as an autoencoder.
///
/// The same `(cfg, dataset)` pair always produces a bit-identical model:
/// initialization, batch order, and optimizer state all derive from
/// `cfg.seed`.
pub fn run_pretrain(ds: &Dataset, cfg: &RunConfig) -> Result<(MlpModel, PretrainLog)> {
    cfg.validate()?;
    let mut model = init_model(&cfg.model_widths(ds.p()), cfg.seed)?;
    let opts = PretrainOptions {
        epochs: cfg.pretrain_epochs,
        batch_size: cfg.pretrain_batch,
        lr: cfg.lr,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        seed: cfg.seed,
    };
    let log = pretrain(&mut model, &ds.features, &opts)?;
    if let (Some(first), Some(last)) = (log.epoch_losses.first(), log.epoch_losses.last())
    {
        log::info!(
            "pretrained {} epochs on {}: loss {first:.6} -> {last:.6}",
            log.epoch_losses.len(),
            ds.name
        );
    }
    Ok((model, log))
}

fn resolve_k(cfg: &RunConfig, ds: &Dataset) -> Result<usize> {
    if cfg.k > 0 {
        return Ok(cfg.k);
    }
    ds.k_true().ok_or_else(|| {
        Error::invalid_config(
            "k = 0 defers to the dataset's label count, but the dataset is unlabeled",
        )
    })
}

fn check_model_matches(model: &MlpModel, ds: &Dataset) -> Result<()> {
    if model.input_width() != ds.p() {
        return Err(Error::invalid_input(format!(
            "model expects {} features but dataset `{}` has {}",
            model.input_width(),
            ds.name,
            ds.p()
        )));
    }
    Ok(())
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Largest |pairwise distance in `z` - pairwise distance in `r`| over all
/// row pairs. Zero (up to rounding) whenever `r` is `z` times an orthogonal
/// matrix.
fn max_isometry_deviation(z: &Matrix, r: &Matrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..z.rows() {
        for j in (i + 1)..z.rows() {
            let dz = euclidean(z.row(i), z.row(j));
            let dr = euclidean(r.row(i), r.row(j));
            worst = worst.max((dz - dr).abs());
        }
    }
    worst
}

fn orthogonality_residual(v: &Matrix) -> f64 {
    v.matmul_tn(v).sub(&Matrix::identity(v.cols())).frobenius_norm()
}

/// Per-iteration cluster structure: what the encoder is trained toward.
struct IterationTargets {
    rot: GreedyRotation,
    targets: Matrix,
    /// Collapsed final coordinate, one value per chunk row.
    y_col: Vec<f64>,
    /// Chunk Kmeans state; `None` when the variant does not cluster chunks.
    state: Option<ClusterState>,
    columns: LossColumns,
}

fn identity_rotation(d: usize) -> GreedyRotation {
    GreedyRotation {
        v: Matrix::identity(d),
        eigenvalues: vec![0.0; d],
        scatter: Matrix::zeros(d, d),
    }
}

/// Runs the alternating loop shared by the full pipeline and its ablations.
pub(crate) fn cluster_loop(
    ds: &Dataset,
    mut model: MlpModel,
    cfg: &RunConfig,
    variant: LoopVariant,
) -> Result<RunArtifacts> {
    cfg.validate()?;
    check_model_matches(&model, ds)?;
    let k = resolve_k(cfg, ds)?;
    let n = ds.n();
    let d = model.embedding_width();
    if k > n {
        return Err(Error::invalid_input(format!(
            "cannot form {k} clusters from {n} samples"
        )));
    }

    // One fixed shuffled order; iterations walk it cyclically so every sample
    // is visited at the same rate regardless of chunk size.
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, streams::CHUNK_ORDER, 0));
    order.shuffle(&mut rng);
    let chunk_len = cfg.chunk_size.min(n);

    let mut adam = AdamState::new(cfg.lr, cfg.beta1, cfg.beta2);
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut prev_assignments: Option<Vec<usize>> = None;
    let mut penultimate: Option<Vec<usize>> = None;
    let mut assignments: Vec<usize> = Vec::new();
    let mut centroids = Matrix::zeros(k, d);
    let mut rotation = Matrix::identity(d);
    let mut converged = false;

    for it in 1..=cfg.max_outer_iters {
        let rows: Vec<usize> = (0..chunk_len)
            .map(|j| order[((it - 1) * chunk_len + j) % n])
            .collect();
        let x_chunk = ds.features.take_rows(&rows);
        let h = model.encode(&x_chunk)?;

        // Stage 1: smooth the chunk embeddings over their affinity graph.
        let (z, power_iterations) = match variant {
            LoopVariant::GreedyOnly => (h.clone(), 0),
            _ => {
                let graph = build_affinity(&h, cfg.m_neighbors)?;
                let pr = power_iterate(&graph.w, &h, cfg.a_hat, cfg.t_max)?;
                (pr.z, pr.iterations)
            }
        };

        // Stage 2: cluster structure and regression targets.
        let iter_targets = match variant {
            LoopVariant::SpectralOnly => IterationTargets {
                rot: identity_rotation(d),
                y_col: z.col(d - 1),
                targets: z.clone(),
                state: None,
                columns: LossColumns::All,
            },
            _ => {
                let state = kmeans(&z, k, stream_seed(cfg.seed, streams::KMEANS, it as u64), cfg.n_init)?;
                let scatter = scatter_matrix(&z, &state)?;
                let rot = solve_rotation(&scatter)?;
                let (targets, y_col) = build_target(&z, &rot, &state)?;
                let columns = if variant == LoopVariant::GreedyOnly {
                    LossColumns::LastOnly
                } else {
                    LossColumns::All
                };
                IterationTargets { rot, targets, y_col, state: Some(state), columns }
            }
        };
        let v = iter_targets.rot.v.clone();
        let rotated_z = z.matmul(&v);

        // Diagnostics are taken before the update so they describe the state
        // the optimizer saw.
        let norm = (h.rows() * d) as f64;
        let rec_spectral = spectral_loss(&h, &v, &iter_targets.targets)? / norm;
        let rec_greedy = greedy_loss(&h, &iter_targets.rot, &iter_targets.targets)? / norm;
        let rec_joint = joint_loss(&h, &v, &iter_targets.targets)? / norm;
        let (entropy_x, entropy_y) =
            entropy_compare(&rotated_z.col(d - 1), &iter_targets.y_col, ENTROPY_BINS)?;
        let (kmeans_objective, trace_residual) = match &iter_targets.state {
            Some(state) => {
                let vsv = v.matmul_tn(&iter_targets.rot.scatter.matmul(&v));
                (state.objective, (vsv.trace() - state.objective).abs())
            }
            None => (f64::NAN, f64::NAN),
        };
        let record_base = (
            power_iterations,
            kmeans_objective,
            trace_residual,
            orthogonality_residual(&v),
            max_isometry_deviation(&z, &rotated_z),
            rec_spectral,
            rec_greedy,
            rec_joint,
            entropy_x,
            entropy_y,
        );

        // New centroids for this iteration, in the rotated space where both
        // the full-dataset refresh and later inference measure distances.
        let new_centroids: Option<Matrix> = iter_targets
            .state
            .as_ref()
            .map(|state| state.centroids.matmul(&v));

        // First iteration: baseline assignments from the pre-update encoder,
        // so the first changed fraction measures what this update did.
        if prev_assignments.is_none() {
            let baseline =
                full_pass(ds, &model, &v, new_centroids.as_ref(), cfg, k, 0)?;
            prev_assignments = Some(baseline.assignments);
        }

        // Stage 3: pull the encoder toward the targets.
        let opts = JointOptions {
            batch_size: cfg.train_batch,
            batches: cfg.batches_per_iter,
            columns: iter_targets.columns,
        };
        let train_loss =
            train_joint_step(&mut model, &x_chunk, &v, &iter_targets.targets, &opts, &mut adam)?;

        // Stage 4: refresh full-dataset assignments and check convergence.
        let pass =
            full_pass(ds, &model, &v, new_centroids.as_ref(), cfg, k, it as u64)?;
        let current = pass.assignments;
        let prev = prev_assignments.as_ref().expect("baseline set above");
        let changed = metrics::changed_fraction(prev, &current)?;
        let (acc, nmi) = match &ds.labels {
            Some(labels) => (
                Some(metrics::acc(labels, &current)?),
                Some(metrics::nmi(labels, &current)?),
            ),
            None => (None, None),
        };

        let (
            power_iterations,
            kmeans_objective,
            trace_residual,
            rotation_orthogonality,
            max_isometry,
            rec_spectral,
            rec_greedy,
            rec_joint,
            entropy_x,
            entropy_y,
        ) = record_base;
        iterations.push(IterationRecord {
            iteration: it,
            power_iterations,
            kmeans_objective,
            trace_residual,
            rotation_orthogonality,
            max_isometry_deviation: max_isometry,
            spectral_loss: rec_spectral,
            greedy_loss: rec_greedy,
            joint_loss: rec_joint,
            entropy_x,
            entropy_y,
            train_loss,
            changed_fraction: changed,
            acc,
            nmi,
        });
        log::debug!(
            "iteration {it}: changed {changed:.4}, train loss {train_loss:.6}"
        );

        // Keep centroids consistent with the assignments we just produced.
        centroids = pass.centroids;
        rotation = v;
        penultimate = prev_assignments.take();
        assignments = current.clone();
        prev_assignments = Some(current);

        if changed < cfg.convergence_threshold {
            converged = true;
            log::info!("converged after {it} iterations (changed {changed:.4})");
            break;
        }
    }

    if !converged {
        let last = iterations.last().map(|r| r.changed_fraction).unwrap_or(1.0);
        log::warn!(
            "stopped at the iteration cap ({}) with changed fraction {last:.4} still >= {}",
            cfg.max_outer_iters,
            cfg.convergence_threshold
        );
    }

    if cfg.final_full_kmeans {
        let full_h = model.encode(&ds.features)?;
        let rotated = full_h.matmul(&rotation);
        let seed = stream_seed(cfg.seed, streams::KMEANS, cfg.max_outer_iters as u64 + 1);
        let state = kmeans(&rotated, k, seed, cfg.n_init)?;
        log::info!(
            "final full-dataset kmeans: objective {:.6}",
            state.objective
        );
        penultimate = Some(std::mem::take(&mut assignments));
        assignments = state.assignments;
        centroids = state.centroids;
    }

    let report = match &ds.labels {
        Some(labels) => Some(EvalReport::compute(
            labels,
            &assignments,
            penultimate.as_deref(),
        )?),
        None => None,
    };

    Ok(RunArtifacts {
        model,
        centroids,
        rotation,
        assignments,
        iterations,
        converged,
        report,
    })
}

/// Full-dataset assignments for one iteration, plus the centroids they were
/// measured against (already in the rotated space).
struct FullPass {
    assignments: Vec<usize>,
    centroids: Matrix,
}

/// Assigns every dataset row to the nearest current centroid in the rotated
/// embedding space. The spectral-only variant carries no centroids through
/// its iterations, so it clusters the full embeddings from scratch instead.
fn full_pass(
    ds: &Dataset,
    model: &MlpModel,
    v: &Matrix,
    rotated_centroids: Option<&Matrix>,
    cfg: &RunConfig,
    k: usize,
    kmeans_stream: u64,
) -> Result<FullPass> {
    let full_h = model.encode(&ds.features)?;
    match rotated_centroids {
        Some(centroids) => {
            let rotated = full_h.matmul(v);
            let (assignments, _) = assign_to_nearest(&rotated, centroids)?;
            Ok(FullPass { assignments, centroids: centroids.clone() })
        }
        None => {
            let seed = stream_seed(cfg.seed, streams::KMEANS, kmeans_stream);
            let state = kmeans(&full_h, k, seed, cfg.n_init)?;
            Ok(FullPass { assignments: state.assignments, centroids: state.centroids })
        }
    }
}

/// Runs the full clustering pipeline on a pretrained model.
pub fn run_cluster(ds: &Dataset, model: MlpModel, cfg: &RunConfig) -> Result<RunArtifacts> {
    cluster_loop(ds, model, cfg, LoopVariant::Full)
}

/// Assigns each sample of `ds` to the nearest stored centroid.
///
/// Works on datasets the model never saw; memory stays linear in the sample
/// count because no pairwise structures are built. Returns the assignments
/// and, when `ds` is labeled, an evaluation against those labels.
pub fn run_infer(
    ds: &Dataset,
    artifacts: &RunArtifacts,
) -> Result<(Vec<usize>, Option<EvalReport>)> {
    check_model_matches(&artifacts.model, ds)?;
    let d = artifacts.model.embedding_width();
    if artifacts.rotation.rows() != d || artifacts.rotation.cols() != d {
        return Err(Error::invalid_input(format!(
            "rotation is {}x{} but the model embeds into {d} dimensions",
            artifacts.rotation.rows(),
            artifacts.rotation.cols()
        )));
    }
    if artifacts.centroids.rows() == 0 || artifacts.centroids.cols() != d {
        return Err(Error::invalid_input(
            "artifacts hold no centroids to assign against",
        ));
    }
    let h = artifacts.model.encode(&ds.features)?;
    let rotated = h.matmul(&artifacts.rotation);
    let (assignments, _) = assign_to_nearest(&rotated, &artifacts.centroids)?;
    let report = match &ds.labels {
        Some(labels) => Some(EvalReport::compute(labels, &assignments, None)?),
        None => None,
    };
    Ok((assignments, report))
}

/// Projects the encoder's embeddings to `dims` principal components and
/// writes them as CSV, with optional cluster and label columns.
pub fn export_embeddings(
    features: &Matrix,
    model: &MlpModel,
    dims: usize,
    assignments: Option<&[usize]>,
    labels: Option<&[usize]>,
    path: &Path,
) -> Result<()> {
    if dims != 2 && dims != 3 {
        return Err(Error::invalid_input(format!(
            "export dims must be 2 or 3, got {dims}"
        )));
    }
    if let Some(a) = assignments {
        if a.len() != features.rows() {
            return Err(Error::invalid_input(format!(
                "{} assignments for {} samples",
                a.len(),
                features.rows()
            )));
        }
    }
    if let Some(l) = labels {
        if l.len() != features.rows() {
            return Err(Error::invalid_input(format!(
                "{} labels for {} samples",
                l.len(),
                features.rows()
            )));
        }
    }
    let h = model.encode(features)?;
    let projected = pca_project(&h, dims.min(h.cols()))?;
    write_embedding_csv(path, &projected, assignments, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_blobs;
    use crate::numerics::probe_allocations;

    fn small_blobs(seed: u64) -> Dataset {
        let centers = Matrix::from_rows(&[
            vec![0.0, 0.0, 0.0, 0.0],
            vec![6.0, 6.0, 0.0, 0.0],
            vec![0.0, 6.0, 6.0, 0.0],
        ]);
        synth_blobs(40, &centers, 0.4, seed)
    }

    fn small_cfg() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.k = 3;
        cfg.embedding_dim = 4;
        cfg.layer_widths = vec![16];
        cfg.m_neighbors = 5;
        cfg.pretrain_epochs = 30;
        cfg.pretrain_batch = 32;
        cfg.train_batch = 10;
        cfg.batches_per_iter = 6;
        cfg.chunk_size = 60;
        cfg.max_outer_iters = 8;
        cfg.n_init = 4;
        cfg.seed = 11;
        cfg
    }

    #[test]
    fn pretrain_is_bit_reproducible() {
        let ds = small_blobs(1);
        let mut cfg = small_cfg();
        cfg.pretrain_epochs = 5;
        let (a, log_a) = run_pretrain(&ds, &cfg).unwrap();
        let (b, log_b) = run_pretrain(&ds, &cfg).unwrap();
        assert_eq!(log_a.epoch_losses, log_b.epoch_losses);
        for (la, lb) in a.layers.iter().zip(&b.layers) {
            assert_eq!(la.weights.as_slice(), lb.weights.as_slice());
            assert_eq!(la.biases, lb.biases);
        }
    }

    #[test]
    fn zero_epoch_pretrain_equals_initialization() {
        let ds = small_blobs(2);
        let mut cfg = small_cfg();
        cfg.pretrain_epochs = 0;
        let (model, log) = run_pretrain(&ds, &cfg).unwrap();
        assert!(log.epoch_losses.is_empty());
        let fresh = init_model(&cfg.model_widths(ds.p()), cfg.seed).unwrap();
        for (a, b) in model.layers.iter().zip(&fresh.layers) {
            assert_eq!(a.weights.as_slice(), b.weights.as_slice());
        }
    }

    #[test]
    fn cluster_run_produces_consistent_artifacts() {
        let ds = small_blobs(3);
        let cfg = small_cfg();
        let (model, _) = run_pretrain(&ds, &cfg).unwrap();
        let artifacts = run_cluster(&ds, model, &cfg).unwrap();

        assert_eq!(artifacts.assignments.len(), ds.n());
        assert_eq!(artifacts.centroids.shape(), (3, cfg.embedding_dim));
        assert!(!artifacts.iterations.is_empty());
        assert!(artifacts.iterations.len() <= cfg.max_outer_iters);

        for rec in &artifacts.iterations {
            // Structural invariants hold every iteration, not just at the end.
            assert!(rec.trace_residual < 1e-8, "trace residual {}", rec.trace_residual);
            assert!(
                rec.rotation_orthogonality < 1e-10,
                "orthogonality {}",
                rec.rotation_orthogonality
            );
            assert!(rec.max_isometry_deviation < 1e-8);
            let sum = rec.spectral_loss + rec.greedy_loss;
            assert!(
                (rec.joint_loss - sum).abs() <= 1e-10 * rec.joint_loss.abs().max(1.0),
                "joint {} != spectral {} + greedy {}",
                rec.joint_loss,
                rec.spectral_loss,
                rec.greedy_loss
            );
            assert!(rec.power_iterations >= 1);
            assert!((0.0..=1.0).contains(&rec.changed_fraction));
        }
        if artifacts.converged {
            let last = artifacts.iterations.last().unwrap();
            assert!(last.changed_fraction < cfg.convergence_threshold);
        }
        // Well-separated blobs should be clustered essentially perfectly.
        let report = artifacts.report.as_ref().unwrap();
        assert!(report.acc > 0.95, "acc {}", report.acc);
    }

    #[test]
    fn cluster_run_is_deterministic() {
        let ds = small_blobs(4);
        let cfg = small_cfg();
        let (model, _) = run_pretrain(&ds, &cfg).unwrap();
        let a = run_cluster(&ds, model.clone(), &cfg).unwrap();
        let b = run_cluster(&ds, model, &cfg).unwrap();
        assert_eq!(a.assignments, b.assignments);
        assert_eq!(a.iterations.len(), b.iterations.len());
        assert_eq!(a.converged, b.converged);
        for (ra, rb) in a.iterations.iter().zip(&b.iterations) {
            assert_eq!(ra.train_loss.to_bits(), rb.train_loss.to_bits());
            assert_eq!(ra.changed_fraction, rb.changed_fraction);
        }
    }

    #[test]
    fn stops_at_first_threshold_crossing() {
        let ds = small_blobs(5);
        let mut cfg = small_cfg();
        // Degenerate threshold: every fraction is < 1, so exactly one
        // iteration must run.
        cfg.convergence_threshold = 1.0;
        let (model, _) = run_pretrain(&ds, &cfg).unwrap();
        let artifacts = run_cluster(&ds, model, &cfg).unwrap();
        assert_eq!(artifacts.iterations.len(), 1);
        assert!(artifacts.converged);
    }

    #[test]
    fn iteration_cap_is_flagged() {
        // Heavily overlapping blobs plus a hot learning rate keep assignments
        // churning, so a one-iteration cap fires before any convergence.
        let centers = Matrix::from_rows(&[
            vec![0.0, 0.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0, 0.0],
            vec![0.0, 1.0, 1.0, 0.0],
        ]);
        let ds = synth_blobs(40, &centers, 1.5, 6);
        let mut cfg = small_cfg();
        cfg.convergence_threshold = 1e-9;
        cfg.max_outer_iters = 1;
        cfg.lr = 0.05;
        let (model, _) = run_pretrain(&ds, &cfg).unwrap();
        let artifacts = run_cluster(&ds, model, &cfg).unwrap();
        assert!(!artifacts.converged);
        assert_eq!(artifacts.iterations.len(), 1);
        assert!(artifacts.iterations[0].changed_fraction > 1e-9);
    }

    #[test]
    fn infer_on_training_data_matches_run_assignments() {
        let ds = small_blobs(7);
        let cfg = small_cfg();
        let (model, _) = run_pretrain(&ds, &cfg).unwrap();
        let artifacts = run_cluster(&ds, model, &cfg).unwrap();
        let (assignments, report) = run_infer(&ds, &artifacts).unwrap();
        assert_eq!(assignments, artifacts.assignments);
        assert!(report.is_some());
    }

    #[test]
    fn infer_never_builds_pairwise_matrices() {
        let ds = small_blobs(8);
        let cfg = small_cfg();
        let (model, _) = run_pretrain(&ds, &cfg).unwrap();
        let artifacts = run_cluster(&ds, model, &cfg).unwrap();
        let n = ds.n();
        let ((), shapes) = probe_allocations(|| {
            run_infer(&ds, &artifacts).unwrap();
        });
        assert!(
            shapes.iter().all(|&(r, c)| !(r == n && c == n)),
            "inference allocated an {n}x{n} matrix"
        );
    }

    #[test]
    fn infer_rejects_mismatched_width() {
        let ds = small_blobs(9);
        let cfg = small_cfg();
        let (model, _) = run_pretrain(&ds, &cfg).unwrap();
        let artifacts = run_cluster(&ds, model, &cfg).unwrap();
        let narrow = Dataset::new(Matrix::zeros(5, 2), None, "narrow", "test").unwrap();
        assert!(run_infer(&narrow, &artifacts).is_err());
    }

    #[test]
    fn final_full_kmeans_keeps_artifacts_consistent() {
        let ds = small_blobs(10);
        let mut cfg = small_cfg();
        cfg.final_full_kmeans = true;
        let (model, _) = run_pretrain(&ds, &cfg).unwrap();
        let artifacts = run_cluster(&ds, model, &cfg).unwrap();
        // Inference must agree with the stored (full-kmeans) assignments.
        let (assignments, _) = run_infer(&ds, &artifacts).unwrap();
        assert_eq!(assignments, artifacts.assignments);
        assert!(artifacts.report.unwrap().acc > 0.95);
    }

    #[test]
    fn unlabeled_data_runs_but_needs_explicit_k() {
        let ds = small_blobs(11);
        let unlabeled =
            Dataset::new(ds.features.clone(), None, "anon", "test").unwrap();
        let mut cfg = small_cfg();
        let (model, _) = run_pretrain(&unlabeled, &cfg).unwrap();

        cfg.k = 0;
        let err = run_cluster(&unlabeled, model.clone(), &cfg).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)), "{err}");

        cfg.k = 3;
        let artifacts = run_cluster(&unlabeled, model, &cfg).unwrap();
        assert!(artifacts.report.is_none());
        assert!(artifacts.iterations.iter().all(|r| r.acc.is_none()));
    }

    #[test]
    fn export_embeddings_writes_projected_csv() {
        let ds = small_blobs(12);
        let cfg = small_cfg();
        let (model, _) = run_pretrain(&ds, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("embed.csv");

        export_embeddings(
            &ds.features,
            &model,
            2,
            None,
            ds.labels.as_deref(),
            &path,
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "pc1,pc2,true_label");
        assert_eq!(lines.count(), ds.n());

        let err = export_embeddings(&ds.features, &model, 4, None, None, &path).unwrap_err();
        assert!(err.to_string().contains("2 or 3"));
    }
}
