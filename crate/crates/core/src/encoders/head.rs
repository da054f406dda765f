use serde::{Deserialize, Serialize};

use crate::encoders::ModelDims;
use crate::error::{Error, Result};
use crate::numerics::{sigmoid, Linear, Prng, Tensor};

/// D_v → H → 1 with tanh in between and a sigmoid on the logit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreHeadParams {
    pub hidden: Linear,
    pub out: Linear,
}

impl ScoreHeadParams {
    pub fn init(dims: &ModelDims, rng: &mut Prng) -> Self {
        ScoreHeadParams {
            hidden: Linear::init(dims.d_visual, dims.head_hidden, true, rng),
            out: Linear::init(dims.head_hidden, 1, true, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        ScoreHeadParams {
            hidden: self.hidden.zeros_like(),
            out: self.out.zeros_like(),
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut v = self.hidden.tensors();
        v.extend(self.out.tensors());
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.hidden.tensors_mut();
        v.extend(self.out.tensors_mut());
        v
    }
}

#[derive(Clone, Debug)]
pub struct HeadTrace {
    pub hidden: Vec<f64>,
    pub logit: f64,
    pub score: f64,
}

impl HeadTrace {
    pub fn forward(z_v: &[f64], head: &ScoreHeadParams) -> Result<Self> {
        if head.out.out_dim() != 1 {
            return Err(Error::shape(head.out.weight.shape(), &[1, head.out.in_dim()]));
        }
        let hidden: Vec<f64> = head.hidden.forward(z_v)?.into_iter().map(f64::tanh).collect();
        let logit = head.out.forward(&hidden)?[0];
        Ok(HeadTrace {
            hidden,
            logit,
            score: sigmoid(logit),
        })
    }

    /// Accumulates ∂L/∂head into `grads`, returns ∂L/∂z_v.
    pub fn backward(&self, z_v: &[f64], head: &ScoreHeadParams, grad_score: f64, grads: &mut ScoreHeadParams) -> Vec<f64> {
        let grad_logit = grad_score * self.score * (1.0 - self.score);
        let grad_hidden = head.out.backward(&self.hidden, &[grad_logit], &mut grads.out);
        let grad_pre: Vec<f64> = grad_hidden
            .iter()
            .zip(&self.hidden)
            .map(|(g, h)| g * (1.0 - h * h))
            .collect();
        head.hidden.backward(z_v, &grad_pre, &mut grads.hidden)
    }
}

/// ŷ = sigmoid(mlp(z_v)). Takes the pre-projection visual feature.
pub fn predict_score(z_v: &[f64], head: &ScoreHeadParams) -> Result<f64> {
    Ok(HeadTrace::forward(z_v, head)?.score)
}
