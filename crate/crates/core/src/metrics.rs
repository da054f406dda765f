//! Evaluation metrics and the effective-dimension / Rademacher diagnostics.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_pair(y: &[f64], y_hat: &[f64], min_len: usize) -> Result<()> {
    if y.len() != y_hat.len() {
        return Err(Error::LengthMismatch(y.len(), y_hat.len()));
    }
    if y.len() < min_len {
        return Err(Error::InvalidArgument(format!(
            "need at least {min_len} values, got {}",
            y.len()
        )));
    }
    if y.iter().chain(y_hat).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Centered correlation; `None` if either side has zero variance.
fn correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn srcc(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat, 2)?;
    correlation(&average_ranks(y), &average_ranks(y_hat)).ok_or(Error::ZeroRankVariance)
}

/// Pearson linear correlation.
pub fn pcc(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat, 2)?;
    correlation(y, y_hat).ok_or(Error::ZeroVariance)
}

pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat, 1)?;
    let mse = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64;
    Ok(mse.sqrt())
}

/// Square root of the mean absolute error.
pub fn rmae(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check_pair(y, y_hat, 1)?;
    let mae = y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64;
    Ok(mae.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub srcc: f64,
    pub pcc: f64,
    pub rmse: f64,
    pub rmae: f64,
    pub n: usize,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "srcc,pcc,rmse,rmae,n";

    pub fn compute(y: &[f64], y_hat: &[f64]) -> Result<Self> {
        Ok(MetricsReport {
            srcc: srcc(y, y_hat)?,
            pcc: pcc(y, y_hat)?,
            rmse: rmse(y, y_hat)?,
            rmae: rmae(y, y_hat)?,
            n: y.len(),
        })
    }

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{}", self.srcc, self.pcc, self.rmse, self.rmae, self.n)
    }
}

/// Smallest k such that the top-k principal components explain at least
/// `threshold` of the total variance. Zero total variance gives 0.
pub fn effective_dim(features: &[Vec<f64>], threshold: f64) -> Result<usize> {
    if features.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 feature rows, got {}",
            features.len()
        )));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} outside (0, 1]")));
    }
    let d = features[0].len();
    if let Some(r) = features.iter().find(|r| r.len() != d) {
        return Err(Error::shape(&[d], &[r.len()]));
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let n = features.len();
    let mut mu = vec![0.0; d];
    for row in features {
        for (m, x) in mu.iter_mut().zip(row) {
            *m += x;
        }
    }
    mu.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| features[i][j] - mu[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let mut eig: Vec<f64> = SymmetricEigen::new(cov)
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0))
        .collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = eig.iter().sum();
    let scale = eig.first().copied().unwrap_or(0.0);
    // Centering identical rows can leave round-off of order ε·|x|.
    let magnitude = features.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
    if total <= 1e-24 * magnitude * magnitude {
        return Ok(0);
    }
    let target = threshold * total - 1e-12 * scale * d as f64;
    let mut acc = 0.0;
    for (k, l) in eig.iter().enumerate() {
        acc += l;
        if acc >= target {
            return Ok(k + 1);
        }
    }
    Ok(d)
}

/// B·√d / √n.
pub fn rademacher_bound(b: f64, d_eff: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    if !(b >= 0.0) || !(d_eff >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bound inputs must be non-negative, got B={b}, d={d_eff}"
        )));
    }
    Ok(b * d_eff.sqrt() / (n as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RademacherEstimate {
    /// Largest feature L2 norm.
    pub b: f64,
    pub d_eff: usize,
    pub n: usize,
    pub bound: f64,
}

impl RademacherEstimate {
    pub fn from_features(features: &[Vec<f64>], threshold: f64) -> Result<Self> {
        let d_eff = effective_dim(features, threshold)?;
        let b = features
            .iter()
            .map(|r| crate::numerics::l2_norm(r))
            .fold(0.0, f64::max);
        let n = features.len();
        Ok(RademacherEstimate {
            b,
            d_eff,
            n,
            bound: rademacher_bound(b, d_eff as f64, n)?,
        })
    }
}
