//! Adam optimizer and Polyak averaging of network parameters.

use serde::{Deserialize, Serialize};

use super::mlp::MlpQNetwork;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl OptimizerState {
    pub fn adam(n_params: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam step on `params` along `grad`.
    pub fn apply(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                expected: self.m.len(),
                actual: if params.len() != self.m.len() { params.len() } else { grad.len() },
            });
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

/// `target <- (1 - tau) * target + tau * online`, parameter-wise.
pub fn soft_update(target: &mut MlpQNetwork, online: &MlpQNetwork, tau: f64) -> Result<()> {
    if target.sizes() != online.sizes() {
        return Err(Error::invalid(format!(
            "shape mismatch: {:?} vs {:?}",
            target.sizes(),
            online.sizes()
        )));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::invalid(format!("tau {tau} not in (0,1]")));
    }
    for (t, o) in target.params_mut().iter_mut().zip(online.params()) {
        *t = (1.0 - tau) * *t + tau * o;
    }
    Ok(())
}
