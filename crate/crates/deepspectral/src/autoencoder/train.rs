//! Reconstruction pretraining and the joint regression step.

use super::model::{Gradients, MlpModel};
use super::optim::AdamState;
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::{stream_seed, streams};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Which rotated coordinates the joint loss covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossColumns {
    /// Every coordinate: self-regression plus the centroid pull.
    All,
    /// Only the last (worst) coordinate: the centroid pull alone.
    LastOnly,
}

#[derive(Debug, Clone)]
pub struct PretrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub seed: u64,
}

/// Per-epoch mean reconstruction losses, in training order.
#[derive(Debug, Clone)]
pub struct PretrainLog {
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct JointOptions {
    /// Rows per mini-batch.
    pub batch_size: usize,
    /// Mini-batch steps per call.
    pub batches: usize,
    pub columns: LossColumns,
}

/// Mean squared reconstruction error and its parameter gradients over all
/// layers. The loss is averaged over batch rows and features so its scale
/// does not depend on batch size.
pub(crate) fn recon_gradients(model: &MlpModel, x: &Matrix) -> (f64, Gradients) {
    let all = 0..model.layers.len();
    let acts = model.forward_cached(x, all.clone());
    let recon = acts.last().unwrap();
    let residual = recon.sub(x);
    let scale = 1.0 / (x.rows() * x.cols()) as f64;
    let loss = residual.as_slice().iter().map(|r| r * r).sum::<f64>() * scale;
    let delta = residual.scale(2.0 * scale);
    let grads = model.backward(&acts, delta, all);
    (loss, grads)
}

pub(crate) fn recon_loss_value(model: &MlpModel, x: &Matrix) -> f64 {
    let recon = model
        .reconstruct(x)
        .expect("caller validated input width");
    let scale = 1.0 / (x.rows() * x.cols()) as f64;
    recon.sub(x).as_slice().iter().map(|r| r * r).sum::<f64>() * scale
}

fn masked_residual(h: &Matrix, v: &Matrix, targets: &Matrix, columns: LossColumns) -> Matrix {
    let mut residual = h.matmul(v).sub(targets);
    if columns == LossColumns::LastOnly {
        let last = residual.cols() - 1;
        for i in 0..residual.rows() {
            for c in 0..last {
                residual.set(i, c, 0.0);
            }
        }
    }
    residual
}

/// Mean squared rotated-regression error and its gradients over the encoder
/// layers only. Averaged over batch rows and embedding width regardless of
/// the column mask, so masking never rescales the surviving column.
pub(crate) fn joint_gradients(
    model: &MlpModel,
    x: &Matrix,
    v: &Matrix,
    targets: &Matrix,
    columns: LossColumns,
) -> (f64, Gradients) {
    let encoder = 0..model.encoder_end;
    let acts = model.forward_cached(x, encoder.clone());
    let h = acts.last().unwrap();
    let residual = masked_residual(h, v, targets, columns);
    let scale = 1.0 / (x.rows() * targets.cols()) as f64;
    let loss = residual.as_slice().iter().map(|r| r * r).sum::<f64>() * scale;
    let delta = residual.matmul_nt(v).scale(2.0 * scale);
    let grads = model.backward(&acts, delta, encoder);
    (loss, grads)
}

pub(crate) fn joint_loss_value(
    model: &MlpModel,
    x: &Matrix,
    v: &Matrix,
    targets: &Matrix,
    columns: LossColumns,
) -> f64 {
    let h = model.encode(x).expect("caller validated input width");
    let residual = masked_residual(&h, v, targets, columns);
    let scale = 1.0 / (x.rows() * targets.cols()) as f64;
    residual.as_slice().iter().map(|r| r * r).sum::<f64>() * scale
}

/// One Adam step over a contiguous slice of layers, pairing each layer's
/// weight and bias tensors with the matching gradients.
fn adam_step_on_layers(
    adam: &mut AdamState,
    layers: &mut [super::model::Layer],
    grads: &Gradients,
) -> Result<()> {
    let mut params: Vec<&mut [f64]> = Vec::with_capacity(layers.len() * 2);
    for layer in layers.iter_mut() {
        params.push(layer.weights.as_mut_slice());
        params.push(layer.biases.as_mut_slice());
    }
    let grad_slices: Vec<&[f64]> = grads
        .weights
        .iter()
        .zip(&grads.biases)
        .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
        .collect();
    adam.step(&mut params, &grad_slices)
}

/// Trains the full autoencoder to reconstruct `features`, shuffling batch
/// order per epoch from the seed. Partial trailing batches are kept; the
/// logged epoch loss is the sample-weighted mean over all batches, measured
/// before each update.
pub fn pretrain(
    model: &mut MlpModel,
    features: &Matrix,
    opts: &PretrainOptions,
) -> Result<PretrainLog> {
    if opts.batch_size == 0 {
        return Err(Error::invalid_config("batch size must be at least 1"));
    }
    if features.rows() == 0 {
        return Err(Error::invalid_input("cannot pretrain on an empty dataset"));
    }
    if features.cols() != model.input_width() {
        return Err(Error::invalid_input(format!(
            "dataset width {} does not match model input width {}",
            features.cols(),
            model.input_width()
        )));
    }

    let n = features.rows();
    let feature_count = features.cols();
    let mut adam = AdamState::new(opts.lr, opts.beta1, opts.beta2);
    let mut epoch_losses = Vec::with_capacity(opts.epochs);

    for epoch in 0..opts.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng =
            ChaCha8Rng::seed_from_u64(stream_seed(opts.seed, streams::PRETRAIN_EPOCH, epoch as u64));
        order.shuffle(&mut rng);

        let mut sse = 0.0;
        for (batch_idx, rows) in order.chunks(opts.batch_size).enumerate() {
            let xb = features.take_rows(rows);
            let (loss, grads) = recon_gradients(model, &xb);
            if !loss.is_finite() {
                return Err(Error::numerical(format!(
                    "non-finite reconstruction loss at epoch {epoch}, batch {batch_idx}"
                )));
            }
            sse += loss * (rows.len() * feature_count) as f64;
            adam_step_on_layers(&mut adam, &mut model.layers, &grads)?;
        }
        epoch_losses.push(sse / (n * feature_count) as f64);
    }

    Ok(PretrainLog { epoch_losses })
}

/// Row indices of mini-batch `s`: `batch_size` consecutive positions
/// starting at `s * batch_size`, wrapping around the chunk.
fn batch_rows(s: usize, batch_size: usize, n: usize) -> Vec<usize> {
    (0..batch_size).map(|i| (s * batch_size + i) % n).collect()
}

/// Runs `opts.batches` mini-batch Adam steps regressing rotated encoder
/// outputs onto `targets`, updating encoder parameters only. Returns the
/// loss of the final mini-batch, measured before its update.
///
/// The optimizer state is caller-owned so momentum can persist across outer
/// iterations of a clustering run.
pub fn train_joint_step(
    model: &mut MlpModel,
    chunk: &Matrix,
    v: &Matrix,
    targets: &Matrix,
    opts: &JointOptions,
    adam: &mut AdamState,
) -> Result<f64> {
    let d = model.embedding_width();
    if chunk.rows() == 0 {
        return Err(Error::invalid_input("cannot train on an empty chunk"));
    }
    if chunk.cols() != model.input_width() {
        return Err(Error::invalid_input(format!(
            "chunk width {} does not match model input width {}",
            chunk.cols(),
            model.input_width()
        )));
    }
    if targets.shape() != (chunk.rows(), d) {
        return Err(Error::invalid_input(format!(
            "targets are {:?}, expected {:?}",
            targets.shape(),
            (chunk.rows(), d)
        )));
    }
    if v.shape() != (d, d) {
        return Err(Error::invalid_input(format!(
            "rotation is {:?}, expected {d}x{d}",
            v.shape()
        )));
    }
    let gram_drift = v.matmul_tn(v).sub(&Matrix::identity(d)).max_abs();
    if gram_drift > 1e-8 {
        return Err(Error::invalid_input(format!(
            "rotation is not orthogonal: max |V^T V - I| = {gram_drift:.3e}"
        )));
    }
    if opts.batch_size == 0 || opts.batches == 0 {
        return Err(Error::invalid_config("batch size and batch count must be at least 1"));
    }

    let n = chunk.rows();
    let mut last_loss = 0.0;
    for s in 0..opts.batches {
        let rows = batch_rows(s, opts.batch_size, n);
        let xb = chunk.take_rows(&rows);
        let yb = targets.take_rows(&rows);
        let (loss, grads) = joint_gradients(model, &xb, v, &yb, opts.columns);
        if !loss.is_finite() {
            return Err(Error::numerical(format!("non-finite joint loss at batch {s}")));
        }
        adam_step_on_layers(adam, &mut model.layers[..model.encoder_end], &grads)?;
        last_loss = loss;
    }
    Ok(last_loss)
}
