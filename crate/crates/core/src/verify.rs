//! Runtime oracle suite: each check compares a production routine against
//! an independent, slower reference.

use std::fmt;

use crate::alignment::{
    energy_distance, energy_distance_brute_force, fal_loss, feature_entropy, momentum_update, EntropyBuffer,
};
use crate::encoders::{embed_caption, encode_image, predict_score, project_visual, ModelDims, Pooling};
use crate::error::Result;
use crate::metrics::{pcc, srcc};
use crate::numerics::{grad_check_loss, GradCheckReport, ParamGroup, Prng, Tensor};
use crate::synthdata::{generate_dataset, GenConfig};
use crate::trainer::checkpoint_text;
use crate::trainer::{objective, Batch, EalInputs, ObjectiveOptions, TrainConfig, TrainableParams};

/// Signature of the energy-distance routine under test.
pub type EnergyFn = fn(&[f64], &[f64]) -> Result<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
    pub max_grad_rel_error: f64,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        write!(f, "max gradient relative error: {:.3e}", self.max_grad_rel_error)
    }
}

/// Brute-force 1-based average ranks: 1 + #less + (#equal − 1)/2.
pub fn rank_oracle(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let less = v.iter().filter(|y| *y < x).count() as f64;
            let equal = v.iter().filter(|y| *y == x).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

/// Correlation from raw moments about the first element.
pub fn correlation_oracle(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (a0, b0) = (a[0], b[0]);
    let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (x - a0, y - b0);
        sa += x;
        sb += y;
        saa += x * x;
        sbb += y * y;
        sab += x * y;
    }
    (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt())
}

fn check_energy(energy: EnergyFn) -> CheckResult {
    let mut rng = Prng::new(1);
    let mut worst: f64 = 0.0;
    let mut failure = None;
    for trial in 0..200 {
        let v: Vec<f64> = (0..2 + rng.below(63)).map(|_| 3.0 * rng.uniform()).collect();
        let s: Vec<f64> = (0..2 + rng.below(63)).map(|_| 3.0 * rng.uniform()).collect();
        let (fast, swapped, same) = match (energy(&v, &s), energy(&s, &v), energy(&v, &v)) {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            _ => {
                failure = Some(format!("trial {trial} returned an error"));
                break;
            }
        };
        let slow = energy_distance_brute_force(&v, &s).expect("sizes checked");
        let same_ref = energy_distance_brute_force(&v, &v).expect("sizes checked");
        worst = worst
            .max((fast - slow).abs())
            .max((fast - swapped).abs())
            .max((same - same_ref).abs());
    }
    CheckResult {
        name: "energy distance vs double loop",
        passed: failure.is_none() && worst < 1e-12,
        detail: failure.unwrap_or_else(|| format!("200 pairs, max deviation {worst:.2e}")),
    }
}

fn check_rank_metrics() -> CheckResult {
    let mut rng = Prng::new(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = 3 + rng.below(98);
        // Coarse grid values force ties.
        let y: Vec<f64> = (0..n).map(|_| rng.below(20) as f64 / 20.0).collect();
        let p: Vec<f64> = (0..n).map(|_| rng.below(25) as f64 / 25.0).collect();
        let (Ok(s), Ok(c)) = (srcc(&y, &p), pcc(&y, &p)) else {
            continue;
        };
        let s_ref = correlation_oracle(&rank_oracle(&y), &rank_oracle(&p));
        let c_ref = correlation_oracle(&y, &p);
        worst = worst.max((s - s_ref).abs()).max((c - c_ref).abs());
    }
    CheckResult {
        name: "SRCC/PCC vs rank and moment oracles",
        passed: worst < 1e-10,
        detail: format!("100 pairs with ties, max deviation {worst:.2e}"),
    }
}

fn check_ema() -> CheckResult {
    let m: f64 = 0.995;
    let theta = Tensor::vector(vec![1.0, -0.5, 2.0]).expect("finite");
    let xi0 = [0.0, 0.3, -1.0];
    let mut xi = Tensor::vector(xi0.to_vec()).expect("finite");
    for _ in 0..1000 {
        momentum_update(&[&theta], &mut [&mut xi], m).expect("shapes match");
    }
    let mt = m.powi(1000);
    let worst = xi
        .data()
        .iter()
        .zip(xi0)
        .zip(theta.data())
        .map(|((x, x0), t)| (x - (mt * x0 + (1.0 - mt) * t)).abs())
        .fold(0.0, f64::max);
    CheckResult {
        name: "momentum EMA closed form",
        passed: worst < 1e-12,
        detail: format!("t=1000, m=0.995, max deviation {worst:.2e}"),
    }
}

fn check_buffer() -> CheckResult {
    let mut rng = Prng::new(3);
    let cap = 16;
    let mut buf = EntropyBuffer::new(cap).expect("positive capacity");
    let mut oracle: Vec<(u64, f64)> = Vec::new();
    let mut ok = true;
    for op in 0..5000u64 {
        if rng.below(4) == 0 {
            let r = 1 + rng.below(8);
            let n = (cap / r).min(oracle.len());
            let f = |id: u64| (id % 7) as f64 * 0.1 + op as f64 * 1e-3;
            crate::alignment::buffer_refresh(&mut buf, r, |id| Ok(f(id))).expect("ids resolvable");
            for e in oracle.iter_mut().take(n) {
                e.1 = f(e.0);
            }
        } else {
            let k = rng.below(2 * cap);
            let batch: Vec<(u64, f64)> = (0..k).map(|j| (op * 100 + j as u64, rng.uniform())).collect();
            buf.push(&batch);
            oracle.extend(&batch);
            let excess = oracle.len().saturating_sub(cap);
            oracle.drain(..excess);
        }
        let got: Vec<(u64, f64)> = buf.entries().map(|e| (e.sample_id, e.entropy)).collect();
        ok &= got == oracle;
    }
    CheckResult {
        name: "entropy buffer vs list replay",
        passed: ok,
        detail: "5000 push/refresh operations".into(),
    }
}

fn check_entropy() -> CheckResult {
    // 50-digit reference for z = (10, 0, 0).
    let reference = 9.987_118_940_574_626e-4;
    let got = feature_entropy(&[10.0, 0.0, 0.0]).unwrap_or(f64::NAN);
    let err = (got - reference).abs();
    CheckResult {
        name: "feature entropy vs high-precision value",
        passed: err < 1e-12,
        detail: format!("deviation {err:.2e}"),
    }
}

/// Small model dimensions for fast gradient checks.
pub fn small_dims() -> ModelDims {
    ModelDims {
        grid: 8,
        patch: 4,
        d_tok: 6,
        d_hidden: 8,
        d_visual: 8,
        d_text: 6,
        head_hidden: 8,
        ..ModelDims::default()
    }
}

/// Fourth-order central-difference check of the full composite objective
/// on a 4-sample batch with λ = 5, γ = 0.01, τ = 0.07, both alignment
/// terms active and attention pooling.
pub fn composite_grad_check(dims: &ModelDims, seed: u64, step: f64, tolerance: f64) -> Result<GradCheckReport> {
    let config = TrainConfig {
        seed,
        model: dims.clone(),
        ..TrainConfig::default()
    };
    config.validate()?;
    let gen = GenConfig {
        grid: dims.grid,
        ..GenConfig::default()
    };
    let samples = generate_dataset(seed, "gradcheck", 4, &gen)?;
    let params = TrainableParams::init(&config);
    let text = checkpoint_text(&config);
    let text_features = samples
        .iter()
        .map(|s| embed_caption(&s.caption, &text))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = Prng::new(seed).substream("gradcheck/buffer");
    let log_dv = (dims.d_visual as f64).ln();
    let detached: Vec<f64> = (0..12).map(|_| log_dv * rng.uniform()).collect();
    let mut text_sample: Vec<f64> = (0..12).map(|_| (dims.d_text as f64).ln() * rng.uniform()).collect();
    for z in &text_features {
        text_sample.push(feature_entropy(z)?);
    }
    let batch = Batch {
        images: samples.iter().map(|s| s.image.as_slice()).collect(),
        targets: samples.iter().map(|s| s.gt).collect(),
        text_features: text_features.iter().map(|z| z.as_slice()).collect(),
    };
    let al = &config.alignment;
    let opts = ObjectiveOptions {
        grid: dims.grid,
        pooling: Pooling::Attention,
        eal: Some(EalInputs {
            detached_visual: &detached,
            text: &text_sample,
        }),
        fal: true,
        lambda: al.lambda,
        gamma: al.gamma,
        temperature: al.temperature,
    };
    let analytic = objective(&params, &batch, &opts)?.1.flatten();
    let mut probe = params.clone();
    let loss = |flat: &[f64]| {
        probe.load_flat(flat).expect("length fixed");
        reference_loss(&probe, &batch, &detached, &text_sample, dims.grid, al.lambda, al.gamma, al.temperature)
            .unwrap_or(f64::NAN)
    };
    Ok(grad_check_loss(loss, &analytic, &params.flatten(), step, tolerance))
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + carry
}

/// Quadratic energy distance with compensated sums, so finite differences
/// of the composite loss stay above roundoff for gradients near 1e-8.
fn energy_reference(v: &[f64], s: &[f64]) -> f64 {
    let mean_abs = |a: &[f64], b: &[f64], skip_diagonal: bool| {
        let terms = a.iter().enumerate().flat_map(|(i, x)| {
            b.iter()
                .enumerate()
                .filter(move |(j, _)| !(skip_diagonal && i == *j))
                .map(move |(_, y)| (x - y).abs())
        });
        let pairs = if skip_diagonal { a.len() * (a.len() - 1) } else { a.len() * b.len() };
        compensated_sum(terms) / pairs as f64
    };
    compensated_sum([2.0 * mean_abs(v, s, false), -mean_abs(v, v, true), -mean_abs(s, s, true)])
}

/// Forward-only composite loss built from the plain encoders and a
/// quadratic energy distance, sharing no code with `objective`'s backward.
#[allow(clippy::too_many_arguments)]
fn reference_loss(
    params: &TrainableParams,
    batch: &Batch<'_>,
    detached: &[f64],
    text_sample: &[f64],
    grid: usize,
    lambda: f64,
    gamma: f64,
    temperature: f64,
) -> Result<f64> {
    let mut sq_errors = Vec::new();
    let mut projected = Vec::new();
    let mut visual = detached.to_vec();
    for (img, y) in batch.images.iter().zip(&batch.targets) {
        let z = encode_image(img, grid, &params.vision, Pooling::Attention)?;
        sq_errors.push((predict_score(&z, &params.head)? - y).powi(2));
        let p = project_visual(&z, &params.connector)?;
        visual.push(feature_entropy(&p)?);
        projected.push(p);
    }
    let mse = compensated_sum(sq_errors.iter().copied()) / sq_errors.len() as f64;
    let eal = energy_reference(&visual, text_sample);
    let text: Vec<Vec<f64>> = batch.text_features.iter().map(|r| r.to_vec()).collect();
    let fal = fal_loss(&projected, &text, temperature)?.value;
    Ok(compensated_sum([mse, lambda * eal, gamma * fal]))
}

fn check_composite(reports: &mut Vec<f64>) -> CheckResult {
    match composite_grad_check(&small_dims(), 7, 1e-4, 1e-4) {
        Ok(r) => {
            reports.push(r.max_rel_error);
            CheckResult {
                name: "composite loss gradient vs finite differences",
                passed: r.passed,
                detail: format!("max relative error {:.2e} at parameter {}", r.max_rel_error, r.worst_index),
            }
        }
        Err(e) => CheckResult {
            name: "composite loss gradient vs finite differences",
            passed: false,
            detail: e.to_string(),
        },
    }
}

pub fn run_verify() -> VerifyReport {
    run_verify_with(energy_distance)
}

/// Runs the suite with a substitute energy-distance routine, so a broken
/// implementation can be shown to fail.
pub fn run_verify_with(energy: EnergyFn) -> VerifyReport {
    let mut grad_errors = Vec::new();
    let checks = vec![
        check_energy(energy),
        check_rank_metrics(),
        check_ema(),
        check_buffer(),
        check_entropy(),
        check_composite(&mut grad_errors),
    ];
    VerifyReport {
        checks,
        max_grad_rel_error: grad_errors.into_iter().fold(f64::NAN, f64::max),
    }
}
