/// Outcome of comparing analytic gradients with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// max |analytic − fd| / max(|analytic|, |fd|, 1e-12) over all parameters.
    pub max_rel_error: f64,
    pub worst_index: usize,
    /// Analytic and finite-difference values at `worst_index`.
    pub worst_pair: (f64, f64),
    /// First parameter index where either side was NaN or infinite.
    pub non_finite_at: Option<usize>,
    pub passed: bool,
}

/// Gradient check against the fourth-order central difference
/// [8(f(x+h) − f(x−h)) − (f(x+2h) − f(x−2h))] / 12h.
///
/// `f` returns the loss and its analytic gradient at a parameter point;
/// only the loss is used at the perturbed points.
pub fn grad_check<F>(mut f: F, params: &[f64], step: f64, tolerance: f64) -> GradCheckReport
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(params);
    grad_check_loss(|p| f(p).0, &analytic, params, step, tolerance)
}

/// As [`grad_check`], with the analytic gradient supplied up front and a
/// loss-only closure for the perturbed points.
pub fn grad_check_loss<F>(mut loss: F, analytic: &[f64], params: &[f64], step: f64, tolerance: f64) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(
        analytic.len(),
        params.len(),
        "analytic gradient length must match parameter count"
    );
    let mut point = params.to_vec();
    let mut max_rel_error: f64 = 0.0;
    let mut worst_index = 0;
    let mut worst_pair = (0.0, 0.0);
    let mut non_finite_at = None;
    for i in 0..params.len() {
        let mut at = |offset: f64| {
            point[i] = params[i] + offset;
            loss(&point)
        };
        let near = at(step) - at(-step);
        let far = at(2.0 * step) - at(-2.0 * step);
        point[i] = params[i];
        let fd = (8.0 * near - far) / (12.0 * step);
        let a = analytic[i];
        if !a.is_finite() || !fd.is_finite() {
            non_finite_at.get_or_insert(i);
            continue;
        }
        let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-12);
        if rel > max_rel_error {
            max_rel_error = rel;
            worst_index = i;
            worst_pair = (a, fd);
        }
    }
    GradCheckReport {
        max_rel_error,
        worst_index,
        worst_pair,
        non_finite_at,
        passed: non_finite_at.is_none() && max_rel_error < tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Prng;

    #[test]
    fn square_at_three() {
        let r = grad_check(|p| (p[0] * p[0], vec![2.0 * p[0]]), &[3.0], 1e-5, 1e-8);
        assert!(r.passed && r.max_rel_error < 1e-8, "{r:?}");
    }

    #[test]
    fn squared_norm() {
        let mut rng = Prng::new(1);
        let x: Vec<f64> = (0..20).map(|_| rng.normal()).collect();
        let r = grad_check(
            |p| (p.iter().map(|v| v * v).sum(), p.iter().map(|v| 2.0 * v).collect()),
            &x,
            1e-5,
            1e-8,
        );
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn nan_reported_with_index() {
        let r = grad_check(
            |p| (p[0] + p[1], vec![1.0, f64::NAN]),
            &[1.0, 2.0],
            1e-5,
            1e-6,
        );
        assert_eq!(r.non_finite_at, Some(1));
        assert!(!r.passed);
    }

    #[test]
    fn wrong_gradient_detected() {
        let r = grad_check(|p| (p[0] * p[0], vec![3.0 * p[0]]), &[1.0], 1e-5, 1e-4);
        assert!(!r.passed);
    }
}
