use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Prng, Tensor};

/// Numerically stable softmax (max-subtracted).
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::EmptyVector);
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    Ok(out)
}

/// log Σ exp(v), max-subtracted. `v` must be non-empty and finite.
pub fn logsumexp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = v.iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let norm = l2_norm(v);
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Pulls a gradient on `v / ‖v‖` back onto `v`.
pub fn l2_normalize_backward(v: &[f64], grad_unit: &[f64]) -> Vec<f64> {
    let norm = l2_norm(v);
    let proj: f64 = v.iter().zip(grad_unit).map(|(x, g)| x * g).sum::<f64>() / (norm * norm);
    v.iter()
        .zip(grad_unit)
        .map(|(x, g)| (g - x * proj) / norm)
        .collect()
}

/// Logistic function, kept strictly inside (0, 1): beyond |x| ≈ 37 the
/// exact value rounds to 1, so it is clamped to the largest double below 1.
pub fn sigmoid(x: f64) -> f64 {
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    y.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// `W x + b` for a row-major `out × in` weight.
pub fn linear_apply(x: &[f64], w: &Tensor, b: Option<&[f64]>) -> Result<Vec<f64>> {
    if w.shape().len() != 2 || w.cols() != x.len() {
        return Err(Error::shape(w.shape(), &[x.len()]));
    }
    if let Some(b) = b {
        if b.len() != w.rows() {
            return Err(Error::shape(w.shape(), &[b.len()]));
        }
    }
    let mut out = Vec::with_capacity(w.rows());
    for o in 0..w.rows() {
        let mut acc = dot(w.row(o), x);
        if let Some(b) = b {
            acc += b[o];
        }
        out.push(acc);
    }
    Ok(out)
}

/// Gradients of a linear map given ∂L/∂output.
#[derive(Clone, Debug)]
pub struct LinearGrads {
    pub weight: Tensor,
    pub bias: Vec<f64>,
    pub input: Vec<f64>,
}

pub fn linear_backward(x: &[f64], w: &Tensor, grad_out: &[f64]) -> Result<LinearGrads> {
    if w.shape().len() != 2 || w.cols() != x.len() || w.rows() != grad_out.len() {
        return Err(Error::shape(w.shape(), &[grad_out.len(), x.len()]));
    }
    let (rows, cols) = (w.rows(), w.cols());
    let mut weight = Tensor::zeros(&[rows, cols]);
    let mut input = vec![0.0; cols];
    for o in 0..rows {
        let g = grad_out[o];
        let wrow = w.row(o);
        let grow = &mut weight.data_mut()[o * cols..(o + 1) * cols];
        for i in 0..cols {
            grow[i] = g * x[i];
            input[i] += wrow[i] * g;
        }
    }
    Ok(LinearGrads {
        weight,
        bias: grad_out.to_vec(),
        input,
    })
}

/// Affine layer `out × in` with optional bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
}

impl Linear {
    /// Weights from N(0, 1/fan_in), zero bias.
    pub fn init(fan_in: usize, fan_out: usize, with_bias: bool, rng: &mut Prng) -> Self {
        Linear {
            weight: Tensor::randn(&[fan_out, fan_in], (1.0 / fan_in as f64).sqrt(), rng),
            bias: with_bias.then(|| Tensor::zeros(&[fan_out])),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Linear {
            weight: Tensor::zeros(self.weight.shape()),
            bias: self.bias.as_ref().map(|b| Tensor::zeros(b.shape())),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        linear_apply(x, &self.weight, self.bias.as_ref().map(|b| b.data()))
    }

    /// Accumulates parameter gradients into `grads` and returns ∂L/∂x.
    pub fn backward(&self, x: &[f64], grad_out: &[f64], grads: &mut Linear) -> Vec<f64> {
        let cols = self.in_dim();
        let mut grad_x = vec![0.0; cols];
        let gw = grads.weight.data_mut();
        for (o, &g) in grad_out.iter().enumerate() {
            let wrow = self.weight.row(o);
            let grow = &mut gw[o * cols..(o + 1) * cols];
            for i in 0..cols {
                grow[i] += g * x[i];
                grad_x[i] += wrow[i] * g;
            }
        }
        if let Some(gb) = grads.bias.as_mut() {
            for (b, g) in gb.data_mut().iter_mut().zip(grad_out) {
                *b += g;
            }
        }
        grad_x
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut v = vec![&self.weight];
        if let Some(b) = &self.bias {
            v.push(b);
        }
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = vec![&mut self.weight];
        if let Some(b) = &mut self.bias {
            v.push(b);
        }
        v
    }
}
