//! Adam with decoupled weight decay. Minimizes; callers maximizing an
//! objective pass the negated gradient.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result, VodError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

impl AdamConfig {
    /// One update. A non-finite gradient is rejected before anything changes.
    pub fn step(&self, params: &mut [f64], grad: &[f64], state: &mut AdamState) -> Result<()> {
        ensure!(
            params.len() == grad.len(),
            "{} parameters but {} gradient entries",
            params.len(),
            grad.len()
        );
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(VodError::NonFinite("optimizer gradient".into()));
        }
        if state.m.len() != params.len() {
            *state = AdamState::new(params.len());
        }
        state.t += 1;
        let bc1 = 1.0 - self.beta1.powi(state.t as i32);
        let bc2 = 1.0 - self.beta2.powi(state.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            state.m[i] = self.beta1 * state.m[i] + (1.0 - self.beta1) * g;
            state.v[i] = self.beta2 * state.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = state.m[i] / bc1;
            let v_hat = state.v[i] / bc2;
            params[i] -= self.lr * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * params[i]);
        }
        Ok(())
    }
}
