use crate::error::{Error, Result};
use crate::numerics::logsumexp;

/// Shannon entropy of `softmax(z)`, in nats. Lies in [0, ln K].
pub fn feature_entropy(z: &[f64]) -> Result<f64> {
    Ok(feature_entropy_with_grad(z)?.0)
}

/// Entropy and its gradient ∂H/∂z_k = −p_k (ln p_k + H).
pub fn feature_entropy_with_grad(z: &[f64]) -> Result<(f64, Vec<f64>)> {
    if z.is_empty() {
        return Err(Error::EmptyVector);
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let lse = logsumexp(z);
    let log_p: Vec<f64> = z.iter().map(|v| v - lse).collect();
    let p: Vec<f64> = log_p.iter().map(|l| l.exp()).collect();
    let raw: f64 = -p.iter().zip(&log_p).map(|(p, l)| p * l).sum::<f64>();
    let h = raw.clamp(0.0, (z.len() as f64).ln());
    let grad = p.iter().zip(&log_p).map(|(p, l)| -p * (l + raw)).collect();
    Ok((h, grad))
}

/// Weighted entropy after fusing the two modalities: αH_v + βH_s.
pub fn fused_entropy(h_visual: f64, h_text: f64, alpha: f64, beta: f64) -> Result<f64> {
    if !(h_visual >= 0.0) || !(h_text >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "entropies must be non-negative, got {h_visual} and {h_text}"
        )));
    }
    if !(alpha > 0.0) || !(beta >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need alpha > 0 and beta >= 0, got {alpha} and {beta}"
        )));
    }
    Ok(alpha * h_visual + beta * h_text)
}
