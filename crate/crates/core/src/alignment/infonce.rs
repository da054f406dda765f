use crate::error::{Error, Result};
use crate::numerics::{dot, l2_normalize, l2_normalize_backward, logsumexp};

/// InfoNCE value plus the gradient with respect to each projected visual row.
#[derive(Clone, Debug, PartialEq)]
pub struct FalLoss {
    pub value: f64,
    pub grad_visual: Vec<Vec<f64>>,
}

/// Row-wise InfoNCE over an N×N similarity matrix with logits sim/τ.
/// Returns the loss and ∂loss/∂sim.
pub fn info_nce(sim: &[Vec<f64>], temperature: f64) -> Result<(f64, Vec<Vec<f64>>)> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    let n = sim.len();
    if n == 0 {
        return Err(Error::EmptyVector);
    }
    if let Some(row) = sim.iter().find(|r| r.len() != n) {
        return Err(Error::shape(&[n, row.len()], &[n, n]));
    }
    let nf = n as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(n);
    for (i, row) in sim.iter().enumerate() {
        let logits: Vec<f64> = row.iter().map(|x| x / temperature).collect();
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        let lse = logsumexp(&logits);
        loss += lse - logits[i];
        let g: Vec<f64> = logits
            .iter()
            .enumerate()
            .map(|(j, l)| {
                let p = (l - lse).exp();
                let target = if i == j { 1.0 } else { 0.0 };
                (p - target) / (nf * temperature)
            })
            .collect();
        grad.push(g);
    }
    Ok((loss / nf, grad))
}

/// Feature alignment loss between projected visual rows and text rows,
/// with cosine similarity and in-batch negatives. Text rows are frozen, so
/// only the visual gradient is returned.
pub fn fal_loss(visual: &[Vec<f64>], text: &[Vec<f64>], temperature: f64) -> Result<FalLoss> {
    if visual.is_empty() || text.is_empty() {
        return Err(Error::EmptyVector);
    }
    if visual.len() != text.len() {
        return Err(Error::LengthMismatch(visual.len(), text.len()));
    }
    let a = visual.iter().map(|r| l2_normalize(r)).collect::<Result<Vec<_>>>()?;
    let b = text.iter().map(|r| l2_normalize(r)).collect::<Result<Vec<_>>>()?;
    if let Some(r) = b.iter().find(|r| r.len() != a[0].len()) {
        return Err(Error::shape(&[a[0].len()], &[r.len()]));
    }
    let sim: Vec<Vec<f64>> = a
        .iter()
        .map(|ai| b.iter().map(|bj| dot(ai, bj)).collect())
        .collect();
    let (value, grad_sim) = info_nce(&sim, temperature)?;
    let grad_visual = visual
        .iter()
        .zip(&grad_sim)
        .map(|(v, gs)| {
            let mut grad_unit = vec![0.0; v.len()];
            for (g, bj) in gs.iter().zip(&b) {
                for (acc, x) in grad_unit.iter_mut().zip(bj) {
                    *acc += g * x;
                }
            }
            l2_normalize_backward(v, &grad_unit)
        })
        .collect();
    Ok(FalLoss { value, grad_visual })
}
