use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Adam hyperparameters. Weight decay is decoupled from the gradient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Per-parameter first/second moments plus the number of completed steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<Tensor>,
    pub second_moment: Vec<Tensor>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(params: &[&Tensor]) -> Self {
        AdamState {
            first_moment: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            second_moment: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            step_count: 0,
        }
    }

    fn check_shapes(&self, params: &[&mut Tensor]) -> Result<()> {
        let n = params.len();
        if self.first_moment.len() != n || self.second_moment.len() != n {
            return Err(Error::LengthMismatch(self.first_moment.len(), n));
        }
        for ((p, m), v) in params.iter().zip(&self.first_moment).zip(&self.second_moment) {
            if p.shape() != m.shape() {
                return Err(Error::shape(p.shape(), m.shape()));
            }
            if p.shape() != v.shape() {
                return Err(Error::shape(p.shape(), v.shape()));
            }
        }
        Ok(())
    }
}

/// One bias-corrected Adam step with decoupled weight decay:
///
/// θ ← θ·(1 − lr·wd) − lr · m̂ / (√v̂ + ε)
///
/// Everything is validated before the first write, so an error leaves
/// both parameters and state untouched.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[&Tensor],
    state: &mut AdamState,
    config: &AdamConfig,
) -> Result<()> {
    // lr = 0 is allowed: it freezes θ, which the momentum checks rely on.
    if !(config.lr >= 0.0 && config.lr.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be finite and non-negative, got {}",
            config.lr
        )));
    }
    if params.len() != grads.len() {
        return Err(Error::LengthMismatch(params.len(), grads.len()));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::shape(p.shape(), g.shape()));
        }
    }
    state.check_shapes(params)?;
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient);
    }

    let t = state.step_count + 1;
    let bc1 = 1.0 - config.beta1.powf(t as f64);
    let bc2 = 1.0 - config.beta2.powf(t as f64);
    let decay = 1.0 - config.lr * config.weight_decay;

    for (i, p) in params.iter_mut().enumerate() {
        let g = grads[i].data();
        let m = state.first_moment[i].data_mut();
        let v = state.second_moment[i].data_mut();
        for (k, theta) in p.data_mut().iter_mut().enumerate() {
            m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
            v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            *theta = *theta * decay - config.lr * m_hat / (v_hat.sqrt() + config.eps);
        }
    }
    state.step_count = t;
    Ok(())
}
