use serde::{Deserialize, Serialize};

use super::network::{Gradients, NetworkParams};
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Bias-corrected Adam moments for one parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &NetworkParams, learning_rate: f64) -> Self {
        let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        AdamState::with_shapes(&shapes, learning_rate)
    }

    pub fn with_shapes(shapes: &[usize], learning_rate: f64) -> Self {
        AdamState {
            learning_rate,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            step: 0,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Update raw tensors in place. Rejects non-finite gradients before
    /// touching any state.
    pub fn step_tensors(&mut self, tensors: &mut [&mut Vec<f64>], grads: &[Vec<f64>]) -> Result<()> {
        if tensors.len() != self.first.len()
            || grads.len() != self.first.len()
            || tensors.iter().zip(grads).zip(&self.first).any(|((t, g), m)| t.len() != m.len() || g.len() != m.len())
        {
            return Err(Error::Contract("Adam state, parameter and gradient shapes differ".into()));
        }
        if let Some((ti, _)) = grads.iter().enumerate().find(|(_, g)| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::numeric("adam_step", format!("non-finite gradient in tensor {ti}")));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (k, (param, grad)) in tensors.iter_mut().zip(grads).enumerate() {
            let m = &mut self.first[k];
            let v = &mut self.second[k];
            for i in 0..grad.len() {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                param[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// One Adam update of `params` with `grads`.
pub fn adam_step(state: &mut AdamState, params: &mut NetworkParams, grads: &Gradients) -> Result<()> {
    let mut tensors = params.tensors_mut();
    state.step_tensors(&mut tensors, &grads.tensors)
}
