use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ParamGroup, Tensor};

/// Elementwise ξ ← mξ + (1−m)θ over matching tensor lists.
pub fn momentum_update(theta: &[&Tensor], xi: &mut [&mut Tensor], momentum: f64) -> Result<()> {
    if !(momentum > 0.0 && momentum < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "momentum must lie in (0, 1), got {momentum}"
        )));
    }
    if theta.len() != xi.len() {
        return Err(Error::LengthMismatch(theta.len(), xi.len()));
    }
    for (t, x) in theta.iter().zip(xi.iter()) {
        if t.shape() != x.shape() {
            return Err(Error::shape(t.shape(), x.shape()));
        }
    }
    for (t, x) in theta.iter().zip(xi.iter_mut()) {
        for (xv, tv) in x.data_mut().iter_mut().zip(t.data()) {
            *xv = momentum * *xv + (1.0 - momentum) * tv;
        }
    }
    Ok(())
}

/// Frozen parameter copy tracked by EMA. Never touched by the optimizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentumModel<P> {
    pub params: P,
    pub momentum: f64,
}

impl<P: ParamGroup + Clone> MomentumModel<P> {
    pub fn from_live(live: &P, momentum: f64) -> Self {
        MomentumModel {
            params: live.clone(),
            momentum,
        }
    }

    pub fn update(&mut self, live: &P) -> Result<()> {
        let theta = live.tensors();
        let mut xi = self.params.tensors_mut();
        momentum_update(&theta, &mut xi, self.momentum)
    }
}
