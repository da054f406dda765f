//! Entropy buffers, momentum model and the alignment losses.

mod buffer;
mod energy;
mod entropy;
mod infonce;
mod momentum;

use serde::{Deserialize, Serialize};

pub use buffer::{buffer_refresh, eal_ready, refresh_count, BufferEntry, EntropyBuffer};
pub use energy::{eal_loss, energy_distance, energy_distance_brute_force, EalLoss};
pub use entropy::{feature_entropy, feature_entropy_with_grad, fused_entropy};
pub use infonce::{fal_loss, info_nce, FalLoss};
pub use momentum::{momentum_update, MomentumModel};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlignmentConfig {
    pub buffer_capacity: usize,
    pub momentum: f64,
    pub refresh_step: usize,
    pub temperature: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        AlignmentConfig {
            buffer_capacity: 2048,
            momentum: 0.995,
            refresh_step: 50,
            temperature: 0.07,
            lambda: 5.0,
            gamma: 0.01,
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

impl AlignmentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("alignment.{what}")));
        if self.buffer_capacity < 2 {
            return bad("buffer_capacity must be at least 2");
        }
        if !(self.momentum > 0.0 && self.momentum < 1.0) {
            return bad("momentum must lie in (0, 1)");
        }
        if self.refresh_step == 0 {
            return bad("refresh_step must be at least 1");
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be non-negative");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be non-negative");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be non-negative");
        }
        Ok(())
    }

    pub fn refresh_count(&self) -> usize {
        self.buffer_capacity / self.refresh_step.max(1)
    }
}

/// L = L_mse + λ·L_eal + γ·L_fal. Any non-finite component is reported by name.
pub fn total_loss(mse: f64, eal: f64, fal: f64, lambda: f64, gamma: f64) -> Result<f64> {
    for (name, v) in [("L_mse", mse), ("L_eal", eal), ("L_fal", fal)] {
        if !v.is_finite() {
            return Err(Error::NonFiniteComponent(name));
        }
    }
    Ok(mse + lambda * eal + gamma * fal)
}
