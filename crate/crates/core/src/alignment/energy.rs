use crate::error::{Error, Result};

/// Energy-distance value plus its gradient with respect to the live visual
/// entries (those passed separately from the detached ones).
#[derive(Clone, Debug, PartialEq)]
pub struct EalLoss {
    pub value: f64,
    pub grad_live: Vec<f64>,
}

/// Sample energy distance with the unbiased (i ≠ i') within-sample terms:
///
/// D = 2/(|V||S|) ΣΣ|v−s| − 1/(|V|(|V|−1)) Σ|v−v'| − 1/(|S|(|S|−1)) Σ|s−s'|
pub fn energy_distance(v: &[f64], s: &[f64]) -> Result<f64> {
    Ok(eal_loss(v, &[], s)?.value)
}

/// Entropy alignment loss over V = `detached_v` ∪ `live_v` and S = `s`.
///
/// Runs in O(n log n) by sorting; ties contribute zero to every gradient
/// term, which is the subgradient choice sign(0) = 0.
pub fn eal_loss(detached_v: &[f64], live_v: &[f64], s: &[f64]) -> Result<EalLoss> {
    let nv = detached_v.len() + live_v.len();
    let ns = s.len();
    if nv < 2 || ns < 2 {
        return Err(Error::InsufficientSample { visual: nv, text: ns });
    }
    if detached_v.iter().chain(live_v).chain(s).any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    // Distances are shift invariant; centering on the smallest value keeps
    // the prefix sums small.
    let origin = detached_v
        .iter()
        .chain(live_v)
        .chain(s)
        .copied()
        .fold(f64::INFINITY, f64::min);
    let mut sv: Vec<f64> = detached_v.iter().chain(live_v).map(|x| x - origin).collect();
    let mut ss: Vec<f64> = s.iter().map(|x| x - origin).collect();
    sv.sort_by(f64::total_cmp);
    ss.sort_by(f64::total_cmp);

    let prefix_s = prefix_sums(&ss);
    let cross: f64 = sv.iter().map(|&x| abs_sum_against(x, &ss, &prefix_s)).sum();
    let within_v = pairwise_abs_sum(&sv);
    let within_s = pairwise_abs_sum(&ss);

    let (nvf, nsf) = (nv as f64, ns as f64);
    let value = 2.0 * cross / (nvf * nsf) - within_v / (nvf * (nvf - 1.0)) - within_s / (nsf * (nsf - 1.0));

    let c_cross = 2.0 / (nvf * nsf);
    let c_within = 2.0 / (nvf * (nvf - 1.0));
    let grad_live = live_v
        .iter()
        .map(|&x| {
            let x = x - origin;
            // The entry itself sits in `sv` at zero distance and adds nothing.
            c_cross * sign_balance(x, &ss) - c_within * sign_balance(x, &sv)
        })
        .collect();
    Ok(EalLoss { value, grad_live })
}

fn prefix_sums(sorted: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(sorted.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for &x in sorted {
        acc += x;
        out.push(acc);
    }
    out
}

/// Σ_j |x − s_j| for sorted `s` with its prefix sums.
fn abs_sum_against(x: f64, s: &[f64], prefix: &[f64]) -> f64 {
    let k = s.partition_point(|&y| y < x);
    let below = x * k as f64 - prefix[k];
    let above = (prefix[s.len()] - prefix[k]) - x * (s.len() - k) as f64;
    below + above
}

/// Σ_{i≠i'} |x_i − x_i'| for sorted `x`.
fn pairwise_abs_sum(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let half: f64 = sorted
        .iter()
        .enumerate()
        .map(|(k, &x)| x * (2.0 * k as f64 - n + 1.0))
        .sum();
    2.0 * half
}

/// #{y < x} − #{y > x} over sorted `ys`.
fn sign_balance(x: f64, ys: &[f64]) -> f64 {
    let below = ys.partition_point(|&y| y < x);
    let not_above = ys.partition_point(|&y| y <= x);
    below as f64 - (ys.len() - not_above) as f64
}

/// Direct double-loop evaluation, used as a reference.
pub fn energy_distance_brute_force(v: &[f64], s: &[f64]) -> Result<f64> {
    if v.len() < 2 || s.len() < 2 {
        return Err(Error::InsufficientSample { visual: v.len(), text: s.len() });
    }
    let (nv, ns) = (v.len() as f64, s.len() as f64);
    let mut cross = 0.0;
    for a in v {
        for b in s {
            cross += (a - b).abs();
        }
    }
    let within = |x: &[f64]| {
        let mut acc = 0.0;
        for (i, a) in x.iter().enumerate() {
            for (j, b) in x.iter().enumerate() {
                if i != j {
                    acc += (a - b).abs();
                }
            }
        }
        acc
    };
    Ok(2.0 * cross / (nv * ns) - within(v) / (nv * (nv - 1.0)) - within(s) / (ns * (ns - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{grad_check, Prng};

    #[test]
    fn hand_examples() {
        assert_eq!(energy_distance(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 2.0);
        assert_eq!(energy_distance(&[0.0, 2.0], &[1.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn identical_samples_carry_the_small_sample_offset() {
        // With i ≠ i' in the within terms but not in the cross term, equal
        // samples give 2W/n² − 2W/(n(n−1)) = −2W/(n²(n−1)), W = Σ_{i≠i'}|v−v'|.
        let v = [0.3, 1.7, 0.9];
        let perm = [0.9, 0.3, 1.7];
        let w = 2.0 * (1.4 + 0.6 + 0.8);
        let expected = -2.0 * w / (9.0 * 2.0);
        assert!((energy_distance(&v, &perm).unwrap() - expected).abs() < 1e-15);
        assert_eq!(energy_distance(&[0.4; 5], &[0.4; 5]).unwrap(), 0.0);
    }

    #[test]
    fn insufficient_sample() {
        assert!(matches!(
            energy_distance(&[1.0], &[1.0, 2.0]),
            Err(Error::InsufficientSample { visual: 1, text: 2 })
        ));
        assert!(eal_loss(&[0.5], &[0.1], &[0.2]).is_err());
    }

    #[test]
    fn matches_brute_force_and_is_symmetric() {
        let mut rng = Prng::new(2024);
        for _ in 0..300 {
            let nv = 2 + rng.below(63);
            let ns = 2 + rng.below(63);
            let v: Vec<f64> = (0..nv).map(|_| 4.0 * rng.uniform()).collect();
            let mut s: Vec<f64> = (0..ns).map(|_| 3.0 * rng.uniform() + 0.5).collect();
            // Exact ties between the two samples.
            s[0] = v[0];
            let fast = energy_distance(&v, &s).unwrap();
            let slow = energy_distance_brute_force(&v, &s).unwrap();
            assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
            let swapped = energy_distance(&s, &v).unwrap();
            assert!((fast - swapped).abs() < 1e-12);
        }
    }

    /// ∂D/∂v_k by explicit sign sums over every pair.
    fn brute_force_grad(detached: &[f64], live: &[f64], s: &[f64]) -> Vec<f64> {
        let all: Vec<f64> = detached.iter().chain(live).copied().collect();
        let (nv, ns) = (all.len() as f64, s.len() as f64);
        let sign = |x: f64| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 };
        (0..live.len())
            .map(|k| {
                let idx = detached.len() + k;
                let x = all[idx];
                let cross: f64 = s.iter().map(|&y| sign(x - y)).sum();
                let within: f64 = all
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != idx)
                    .map(|(_, &y)| sign(x - y))
                    .sum();
                2.0 * cross / (nv * ns) - 2.0 * within / (nv * (nv - 1.0))
            })
            .collect()
    }

    #[test]
    fn gradient_matches_sign_sum_oracle_and_finite_differences() {
        let mut rng = Prng::new(5);
        for _ in 0..200 {
            let detached: Vec<f64> = (0..1 + rng.below(10)).map(|_| rng.uniform()).collect();
            let live: Vec<f64> = (0..1 + rng.below(6)).map(|_| rng.uniform()).collect();
            let s: Vec<f64> = (0..2 + rng.below(10)).map(|_| rng.uniform()).collect();
            let out = eal_loss(&detached, &live, &s).unwrap();
            let oracle = brute_force_grad(&detached, &live, &s);
            for (k, (g, o)) in out.grad_live.iter().zip(&oracle).enumerate() {
                assert!((g - o).abs() < 1e-12, "{g} vs {o}");
                // Piecewise linear: central differences are exact away from
                // kinks, up to round-off.
                let h = 1e-7;
                let (mut up, mut down) = (live.clone(), live.clone());
                up[k] += h;
                down[k] -= h;
                let fd = (eal_loss(&detached, &up, &s).unwrap().value
                    - eal_loss(&detached, &down, &s).unwrap().value)
                    / (2.0 * h);
                assert!((fd - g).abs() < 1e-6, "{fd} vs {g}");
            }
        }
    }

    #[test]
    fn live_and_detached_split_does_not_change_value() {
        let all = [0.1, 0.5, 0.9, 1.3];
        let s = [0.2, 0.4, 1.0];
        let a = eal_loss(&all, &[], &s).unwrap().value;
        let b = eal_loss(&all[..1], &all[1..], &s).unwrap().value;
        assert!((a - b).abs() < 1e-15);
    }
}
