//! Adam with bias correction over flat parameter tensors.

use crate::error::{Error, Result};

/// Adam optimizer state: first and second moment accumulators per tensor,
/// lazily shaped on the first step.
#[derive(Debug, Clone)]
pub struct AdamState {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step_count: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        AdamState {
            lr,
            beta1,
            beta2,
            epsilon: 1e-8,
            step_count: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Replaces the denominator offset (default `1e-8`). Zero is allowed:
    /// a zero second moment then produces a zero update rather than a
    /// division by zero.
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn steps_taken(&self) -> u64 {
        self.step_count
    }

    /// Applies one Adam update to every tensor in `params` using the
    /// matching entry of `grads`. Tensor count and shapes are fixed by the
    /// first call.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::invalid_input(format!(
                "{} parameter tensors but {} gradient tensors",
                params.len(),
                grads.len()
            )));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = params.iter().map(|p| vec![0.0; p.len()]).collect();
        }
        if self.m.len() != params.len() {
            return Err(Error::invalid_input(format!(
                "optimizer was initialized with {} tensors, got {}",
                self.m.len(),
                params.len()
            )));
        }

        self.step_count += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step_count as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step_count as i32);

        for (t, (param, grad)) in params.iter_mut().zip(grads).enumerate() {
            if param.len() != grad.len() || param.len() != self.m[t].len() {
                return Err(Error::invalid_input(format!(
                    "tensor {t} length mismatch: param {}, grad {}, state {}",
                    param.len(),
                    grad.len(),
                    self.m[t].len()
                )));
            }
            let m = &mut self.m[t];
            let v = &mut self.v[t];
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                let denom = v_hat.sqrt() + self.epsilon;
                if denom > 0.0 {
                    param[i] -= self.lr * m_hat / denom;
                }
            }
        }
        Ok(())
    }
}
