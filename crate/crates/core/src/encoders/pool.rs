use crate::error::{Error, Result};
use crate::numerics::{dot, softmax};

#[derive(Clone, Debug, PartialEq)]
pub struct PoolOutput {
    pub pooled: Vec<f64>,
    /// Convex weights over the tokens.
    pub weights: Vec<f64>,
}

/// `Σ aᵢ·tokenᵢ` with `a = softmax(query·tokenᵢ / √D)`.
pub fn attention_pool(tokens: &[Vec<f64>], query: &[f64]) -> Result<PoolOutput> {
    if tokens.is_empty() {
        return Err(Error::NoTokens);
    }
    let d = query.len();
    if let Some(t) = tokens.iter().find(|t| t.len() != d) {
        return Err(Error::shape(&[t.len()], &[d]));
    }
    let scale = 1.0 / (d as f64).sqrt();
    let scores: Vec<f64> = tokens.iter().map(|t| dot(query, t) * scale).collect();
    let weights = softmax(&scores)?;
    Ok(PoolOutput {
        pooled: weighted_sum(tokens, &weights),
        weights,
    })
}

pub fn mean_pool(tokens: &[Vec<f64>]) -> Result<PoolOutput> {
    if tokens.is_empty() {
        return Err(Error::NoTokens);
    }
    let w = 1.0 / tokens.len() as f64;
    let weights = vec![w; tokens.len()];
    Ok(PoolOutput {
        pooled: weighted_sum(tokens, &weights),
        weights,
    })
}

fn weighted_sum(tokens: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; tokens[0].len()];
    for (t, &a) in tokens.iter().zip(weights) {
        for (o, v) in out.iter_mut().zip(t) {
            *o += a * v;
        }
    }
    out
}

/// Gradients of attention pooling: returns (∂L/∂tokens, ∂L/∂query).
pub fn attention_pool_backward(
    tokens: &[Vec<f64>],
    query: &[f64],
    weights: &[f64],
    grad_pooled: &[f64],
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let scale = 1.0 / (query.len() as f64).sqrt();
    let grad_w: Vec<f64> = tokens.iter().map(|t| dot(grad_pooled, t)).collect();
    let mean_gw: f64 = weights.iter().zip(&grad_w).map(|(a, g)| a * g).sum();
    let mut grad_query = vec![0.0; query.len()];
    let mut grad_tokens = Vec::with_capacity(tokens.len());
    for ((t, &a), &gw) in tokens.iter().zip(weights).zip(&grad_w) {
        let grad_score = a * (gw - mean_gw) * scale;
        let gt: Vec<f64> = grad_pooled
            .iter()
            .zip(query)
            .map(|(gp, q)| a * gp + grad_score * q)
            .collect();
        for (gq, v) in grad_query.iter_mut().zip(t) {
            *gq += grad_score * v;
        }
        grad_tokens.push(gt);
    }
    (grad_tokens, grad_query)
}
