//! Layer stack, initialization, and forward/backward passes.

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::{stream_seed, streams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::ops::Range;

/// Elementwise nonlinearity applied after a layer's affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

/// One dense layer: `out = act(x W^T + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out x in` weight matrix.
    pub weights: Matrix,
    /// One bias per output unit.
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    fn out_width(&self) -> usize {
        self.weights.rows()
    }

    fn in_width(&self) -> usize {
        self.weights.cols()
    }

    fn forward(&self, x: &Matrix) -> Matrix {
        let mut out = x.matmul_nt(&self.weights);
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            for (v, b) in row.iter_mut().zip(&self.biases) {
                *v += b;
                if self.activation == Activation::Relu && *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        out
    }
}

/// A mirrored encoder/decoder stack. Layers `0..encoder_end` form the
/// encoder; the rest reconstruct the input.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    /// Number of leading layers that make up the encoder.
    pub encoder_end: usize,
}

/// Per-layer parameter gradients for a contiguous range of layers.
pub(crate) struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpModel {
    /// Width of the input (and reconstruction) space.
    pub fn input_width(&self) -> usize {
        self.layers[0].in_width()
    }

    /// Width of the embedding space.
    pub fn embedding_width(&self) -> usize {
        self.layers[self.encoder_end - 1].out_width()
    }

    fn check_width(&self, x: &Matrix, expected: usize, what: &str) -> Result<()> {
        if x.cols() != expected {
            return Err(Error::invalid_input(format!(
                "{what} expects width {expected}, got {}",
                x.cols()
            )));
        }
        Ok(())
    }

    /// Forward pass over `range`, keeping every intermediate activation.
    /// `result[0]` is the input; `result[i+1]` is the output of layer
    /// `range.start + i`.
    pub(crate) fn forward_cached(&self, x: &Matrix, range: Range<usize>) -> Vec<Matrix> {
        let mut acts = Vec::with_capacity(range.len() + 1);
        acts.push(x.clone());
        for idx in range {
            let next = self.layers[idx].forward(acts.last().unwrap());
            acts.push(next);
        }
        acts
    }

    /// Backpropagates `delta` (the loss gradient with respect to the output
    /// of the last layer in `range`) through the cached activations,
    /// returning parameter gradients for exactly the layers in `range`.
    pub(crate) fn backward(
        &self,
        acts: &[Matrix],
        mut delta: Matrix,
        range: Range<usize>,
    ) -> Gradients {
        let count = range.len();
        let mut weight_grads: Vec<Option<Matrix>> = (0..count).map(|_| None).collect();
        let mut bias_grads: Vec<Option<Vec<f64>>> = (0..count).map(|_| None).collect();

        for (pos, idx) in range.clone().enumerate().rev() {
            let layer = &self.layers[idx];
            let output = &acts[pos + 1];
            if layer.activation == Activation::Relu {
                // Post-activation is positive exactly where the unit fired.
                for i in 0..delta.rows() {
                    let gate = output.row(i);
                    for (v, &g) in delta.row_mut(i).iter_mut().zip(gate) {
                        if g <= 0.0 {
                            *v = 0.0;
                        }
                    }
                }
            }
            weight_grads[pos] = Some(delta.matmul_tn(&acts[pos]));
            bias_grads[pos] = Some(delta.column_sums());
            if pos > 0 {
                delta = delta.matmul(&layer.weights);
            }
        }

        Gradients {
            weights: weight_grads.into_iter().map(|g| g.unwrap()).collect(),
            biases: bias_grads.into_iter().map(|g| g.unwrap()).collect(),
        }
    }

    /// Maps inputs to embeddings through the encoder half.
    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        self.check_width(x, self.input_width(), "encoder")?;
        let mut h = x.clone();
        for layer in &self.layers[..self.encoder_end] {
            h = layer.forward(&h);
        }
        Ok(h)
    }

    /// Maps embeddings back to input space through the decoder half.
    pub fn decode(&self, h: &Matrix) -> Result<Matrix> {
        self.check_width(h, self.embedding_width(), "decoder")?;
        let mut x = h.clone();
        for layer in &self.layers[self.encoder_end..] {
            x = layer.forward(&x);
        }
        Ok(x)
    }

    /// Full round trip `decode(encode(x))`.
    pub fn reconstruct(&self, x: &Matrix) -> Result<Matrix> {
        self.decode(&self.encode(x)?)
    }
}

/// Builds a mirrored network from a full width palindrome such as
/// `[P, 500, 500, 2000, D, 2000, 500, 500, P]`.
///
/// Hidden layers use relu; the embedding layer (the one producing the middle
/// width) and the final reconstruction layer are linear. Weights draw from
/// `U(-sqrt(6/fan_in), +sqrt(6/fan_in))`, biases start at zero, and the draw
/// order is fixed so a seed pins every parameter.
pub fn init_model(layer_widths: &[usize], seed: u64) -> Result<MlpModel> {
    if layer_widths.len() < 3 || layer_widths.len() % 2 == 0 {
        return Err(Error::invalid_config(format!(
            "layer widths must form an odd-length palindrome of at least 3 entries, got {}",
            layer_widths.len()
        )));
    }
    if layer_widths.iter().any(|&w| w == 0) {
        return Err(Error::invalid_config("layer widths must be positive"));
    }
    let len = layer_widths.len();
    for i in 0..len / 2 {
        if layer_widths[i] != layer_widths[len - 1 - i] {
            return Err(Error::invalid_config(format!(
                "decoder must mirror encoder: width[{i}] = {} but width[{}] = {}",
                layer_widths[i],
                len - 1 - i,
                layer_widths[len - 1 - i]
            )));
        }
    }

    let encoder_end = (len - 1) / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, streams::MODEL_INIT, 0));
    let mut layers = Vec::with_capacity(len - 1);
    for l in 0..len - 1 {
        let fan_in = layer_widths[l];
        let fan_out = layer_widths[l + 1];
        let bound = (6.0 / fan_in as f64).sqrt();
        let weights =
            Matrix::from_fn(fan_out, fan_in, |_, _| rng.gen_range(-bound..bound));
        let activation = if l == encoder_end - 1 || l == len - 2 {
            Activation::Linear
        } else {
            Activation::Relu
        };
        layers.push(Layer { weights, biases: vec![0.0; fan_out], activation });
    }

    Ok(MlpModel { layers, encoder_end })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure_of_a_minimal_palindrome() {
        let m = init_model(&[4, 2, 4], 0).unwrap();
        assert_eq!(m.encoder_end, 1);
        assert_eq!(m.layers.len(), 2);
        assert_eq!(m.layers[0].weights.shape(), (2, 4));
        assert_eq!(m.layers[1].weights.shape(), (4, 2));
        assert_eq!(m.layers[0].activation, Activation::Linear);
        assert_eq!(m.layers[1].activation, Activation::Linear);
        assert_eq!(m.input_width(), 4);
        assert_eq!(m.embedding_width(), 2);
    }

    #[test]
    fn deep_palindrome_places_relu_on_hidden_layers_only() {
        let m = init_model(&[8, 16, 4, 2, 4, 16, 8], 1).unwrap();
        assert_eq!(m.encoder_end, 3);
        let acts: Vec<Activation> = m.layers.iter().map(|l| l.activation).collect();
        assert_eq!(
            acts,
            vec![
                Activation::Relu,
                Activation::Relu,
                Activation::Linear,
                Activation::Relu,
                Activation::Relu,
                Activation::Linear,
            ]
        );
        assert!(m.layers.iter().all(|l| l.biases.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn bad_width_lists_are_rejected() {
        assert!(matches!(init_model(&[4, 2], 0), Err(Error::InvalidConfig(_))));
        assert!(matches!(init_model(&[4, 2, 2, 4], 0), Err(Error::InvalidConfig(_))));
        assert!(matches!(init_model(&[4, 2, 5], 0), Err(Error::InvalidConfig(_))));
        assert!(matches!(init_model(&[4, 0, 4], 0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn seeding_is_reproducible_and_seed_sensitive() {
        let a = init_model(&[6, 4, 2, 4, 6], 9).unwrap();
        let b = init_model(&[6, 4, 2, 4, 6], 9).unwrap();
        let c = init_model(&[6, 4, 2, 4, 6], 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.layers[0].weights, c.layers[0].weights);
    }

    #[test]
    fn initializer_scale_matches_the_uniform_bound() {
        let m = init_model(&[100, 50, 3, 50, 100], 4).unwrap();
        let w = &m.layers[0].weights;
        let samples = w.as_slice();
        let mean: f64 = samples.iter().sum::<f64>() / samples.len() as f64;
        let var: f64 =
            samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / samples.len() as f64;
        // U(-a, a) has stddev a/sqrt(3) = sqrt(2/fan_in) for a = sqrt(6/fan_in).
        let expected = (2.0_f64 / 100.0).sqrt();
        assert!((var.sqrt() - expected).abs() < 0.3 * expected);
        let bound = (6.0_f64 / 100.0).sqrt();
        assert!(samples.iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn zero_weights_embed_everything_to_zero() {
        let mut m = init_model(&[3, 2, 3], 0).unwrap();
        for layer in &mut m.layers {
            for v in layer.weights.as_mut_slice() {
                *v = 0.0;
            }
        }
        let h = m.encode(&Matrix::from_fn(4, 3, |i, j| (i + j) as f64)).unwrap();
        assert_eq!(h.max_abs(), 0.0);
    }

    #[test]
    fn identity_layer_is_the_identity_map() {
        let mut m = init_model(&[3, 3, 3], 0).unwrap();
        m.layers[0].weights = Matrix::identity(3);
        m.layers[0].biases = vec![0.0; 3];
        let x = Matrix::from_fn(2, 3, |i, j| (i * 3 + j) as f64 - 2.5);
        assert_eq!(m.encode(&x).unwrap(), x);
    }

    #[test]
    fn hand_computed_relu_forward_pass() {
        // Encoder: 3 -> 2 relu, then 2 -> 2 linear embedding.
        let mut m = init_model(&[3, 2, 2, 2, 3], 0).unwrap();
        m.layers[0].weights =
            Matrix::from_rows(&[vec![1.0, 0.0, -1.0], vec![0.5, 0.5, 0.0]]);
        m.layers[0].biases = vec![0.0, -1.0];
        m.layers[1].weights = Matrix::from_rows(&[vec![2.0, 0.0], vec![1.0, 1.0]]);
        m.layers[1].biases = vec![0.5, 0.0];

        // Row 0: [1, 2, 3] -> pre [-2, 0.5] -> relu [0, 0.5]
        //        -> linear [0*2 + 0.5, 0 + 0.5] = [0.5, 0.5]
        // Row 1: [3, 0, 1] -> pre [2, 0.5] -> relu [2, 0.5]
        //        -> linear [4.5, 2.5]
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![3.0, 0.0, 1.0]]);
        let h = m.encode(&x).unwrap();
        assert_eq!(h, Matrix::from_rows(&[vec![0.5, 0.5], vec![4.5, 2.5]]));
    }

    #[test]
    fn width_mismatches_are_rejected() {
        let m = init_model(&[4, 2, 4], 0).unwrap();
        assert!(matches!(m.encode(&Matrix::zeros(2, 3)), Err(Error::InvalidInput(_))));
        assert!(matches!(m.decode(&Matrix::zeros(2, 3)), Err(Error::InvalidInput(_))));
        assert!(m.reconstruct(&Matrix::zeros(2, 4)).is_ok());
    }
}
