use crate::error::{Error, Result};

/// Cosine annealing from `lr0` at step 0 to `lr_min` at step `total`.
pub fn cosine_lr(step: u64, total: u64, lr0: f64, lr_min: f64) -> Result<f64> {
    if total == 0 {
        return Err(Error::InvalidArgument("total steps must be positive".into()));
    }
    if step > total {
        return Err(Error::StepBeyondHorizon { step, total });
    }
    if lr0 < lr_min {
        return Err(Error::InvalidArgument(format!(
            "lr0 {lr0} is below lr_min {lr_min}"
        )));
    }
    let progress = step as f64 / total as f64;
    Ok(lr_min + 0.5 * (lr0 - lr_min) * (1.0 + (std::f64::consts::PI * progress).cos()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_midpoint() {
        assert_eq!(cosine_lr(0, 100, 1e-3, 2.5e-6).unwrap(), 1e-3);
        assert_eq!(cosine_lr(100, 100, 1e-3, 2.5e-6).unwrap(), 2.5e-6);
        let mid = cosine_lr(50, 100, 1e-3, 2.5e-6).unwrap();
        assert!((mid - (1e-3 + 2.5e-6) / 2.0).abs() < 1e-18);
    }

    #[test]
    fn monotone_and_bounded() {
        let mut prev = f64::INFINITY;
        for t in 0..=1000 {
            let lr = cosine_lr(t, 1000, 1e-3, 2.5e-6).unwrap();
            assert!(lr <= prev && (2.5e-6..=1e-3).contains(&lr));
            prev = lr;
        }
    }

    #[test]
    fn beyond_horizon() {
        assert!(matches!(
            cosine_lr(11, 10, 1e-3, 0.0),
            Err(Error::StepBeyondHorizon { step: 11, total: 10 })
        ));
    }
}
