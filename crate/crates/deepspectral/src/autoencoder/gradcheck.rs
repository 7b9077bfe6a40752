//! Finite-difference verification of the analytic gradients.

use super::model::{Activation, MlpModel};
use super::train::{
    joint_gradients, joint_loss_value, recon_gradients, recon_loss_value, LossColumns,
};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

const STEP: f64 = 1e-5;
/// Differences below this are indistinguishable from central-difference
/// rounding noise at O(1) loss scales and count as agreement.
const NOISE_FLOOR: f64 = 1e-8;

/// Which loss to differentiate.
pub enum CheckLoss<'a> {
    /// Mean squared reconstruction error; checks every layer.
    Reconstruction,
    /// Mean squared rotated-regression error; checks encoder layers only.
    Joint { v: &'a Matrix, targets: &'a Matrix, columns: LossColumns },
}

/// Outcome of a gradient check.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    /// Largest relative disagreement over all checked parameters.
    pub max_rel_error: f64,
    /// Parameters compared against the finite-difference oracle.
    pub checked: usize,
    /// Parameters skipped because the perturbation crossed a relu kink,
    /// where the loss is not differentiable.
    pub masked: usize,
}

/// Booleans recording which relu units fired, across every layer the loss
/// evaluation passes through. Two perturbed models with equal patterns sit
/// on the same smooth piece of the loss.
fn relu_pattern(model: &MlpModel, x: &Matrix, layer_count: usize) -> Vec<bool> {
    let acts = model.forward_cached(x, 0..layer_count);
    let mut pattern = Vec::new();
    for (i, act) in acts.iter().skip(1).enumerate() {
        if model.layers[i].activation == Activation::Relu {
            pattern.extend(act.as_slice().iter().map(|&v| v > 0.0));
        }
    }
    pattern
}

/// Compares analytic gradients with central finite differences for every
/// parameter the given loss trains, skipping parameters whose perturbation
/// changes a relu firing pattern.
pub fn grad_check(model: &MlpModel, loss: CheckLoss, x: &Matrix) -> Result<GradCheckReport> {
    if x.rows() == 0 || x.cols() != model.input_width() {
        return Err(Error::invalid_input(format!(
            "check input is {:?}, model expects width {}",
            x.shape(),
            model.input_width()
        )));
    }
    if let CheckLoss::Joint { v, targets, .. } = &loss {
        let d = model.embedding_width();
        if v.shape() != (d, d) {
            return Err(Error::invalid_input(format!(
                "rotation is {:?}, expected {d}x{d}",
                v.shape()
            )));
        }
        if targets.shape() != (x.rows(), d) {
            return Err(Error::invalid_input(format!(
                "targets are {:?}, expected {:?}",
                targets.shape(),
                (x.rows(), d)
            )));
        }
    }

    let (layer_count, grads) = match &loss {
        CheckLoss::Reconstruction => {
            let (_, g) = recon_gradients(model, x);
            (model.layers.len(), g)
        }
        CheckLoss::Joint { v, targets, columns } => {
            let (_, g) = joint_gradients(model, x, v, targets, *columns);
            (model.encoder_end, g)
        }
    };

    let eval = |m: &MlpModel| -> f64 {
        match &loss {
            CheckLoss::Reconstruction => recon_loss_value(m, x),
            CheckLoss::Joint { v, targets, columns } => {
                joint_loss_value(m, x, v, targets, *columns)
            }
        }
    };

    let mut work = model.clone();
    let mut report = GradCheckReport { max_rel_error: 0.0, checked: 0, masked: 0 };

    for layer in 0..layer_count {
        let weight_count = work.layers[layer].weights.as_slice().len();
        let bias_count = work.layers[layer].biases.len();
        for slot in 0..weight_count + bias_count {
            let (is_bias, idx) =
                if slot < weight_count { (false, slot) } else { (true, slot - weight_count) };
            let read = |m: &MlpModel| {
                if is_bias {
                    m.layers[layer].biases[idx]
                } else {
                    m.layers[layer].weights.as_slice()[idx]
                }
            };
            let write = |m: &mut MlpModel, value: f64| {
                if is_bias {
                    m.layers[layer].biases[idx] = value;
                } else {
                    m.layers[layer].weights.as_mut_slice()[idx] = value;
                }
            };

            let original = read(&work);
            write(&mut work, original + STEP);
            let pattern_plus = relu_pattern(&work, x, layer_count);
            let loss_plus = eval(&work);
            write(&mut work, original - STEP);
            let pattern_minus = relu_pattern(&work, x, layer_count);
            let loss_minus = eval(&work);
            write(&mut work, original);

            if pattern_plus != pattern_minus {
                report.masked += 1;
                continue;
            }

            let numeric = (loss_plus - loss_minus) / (2.0 * STEP);
            let analytic = if is_bias {
                grads.biases[layer][idx]
            } else {
                grads.weights[layer].as_slice()[idx]
            };
            let diff = (analytic - numeric).abs();
            let error =
                if diff < NOISE_FLOOR { 0.0 } else { diff / analytic.abs().max(numeric.abs()) };
            if error > report.max_rel_error {
                report.max_rel_error = error;
            }
            report.checked += 1;
        }
    }

    Ok(report)
}
