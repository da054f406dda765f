use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::{MetricsReport, RademacherEstimate};
use crate::synthdata::SyntheticSample;
use crate::trainer::{evaluate, visual_features, Case, TrainConfig, Trainer};

/// Variance threshold for the effective-dimension diagnostic.
pub const D_EFF_THRESHOLD: f64 = 0.95;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub case: Case,
    pub seed: u64,
    pub metrics: MetricsReport,
    /// Diagnostics on test-set visual features.
    pub rademacher: RademacherEstimate,
    /// Buffer energy distance at the first gated iteration and at the end.
    pub energy_first: Option<f64>,
    pub energy_final: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanStd { mean, std }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case: Case,
    pub seeds: usize,
    pub srcc: MeanStd,
    pub pcc: MeanStd,
    pub rmse: MeanStd,
    pub rmae: MeanStd,
    pub d_eff: MeanStd,
    pub bound: MeanStd,
    /// 1 − mean(final) / mean(first) over seeds that reached the gate.
    pub energy_drop: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    pub summary: Vec<CaseSummary>,
}

impl AblationReport {
    pub fn summary_for(&self, case: Case) -> Option<&CaseSummary> {
        self.summary.iter().find(|s| s.case == case)
    }

    pub fn rows_csv(&self) -> String {
        let mut out = String::from("case,seed,srcc,pcc,rmse,rmae,n,d_eff,B,bound,energy_first,energy_final\n");
        for r in &self.rows {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.case,
                r.seed,
                r.metrics.csv_row(),
                r.rademacher.d_eff,
                r.rademacher.b,
                r.rademacher.bound,
                opt(r.energy_first),
                opt(r.energy_final),
            ));
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "case,seeds,srcc_mean,srcc_std,pcc_mean,pcc_std,rmse_mean,rmse_std,rmae_mean,rmae_std,d_eff_mean,d_eff_std,bound_mean,bound_std,energy_drop\n",
        );
        for s in &self.summary {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                s.case,
                s.seeds,
                s.srcc.mean,
                s.srcc.std,
                s.pcc.mean,
                s.pcc.std,
                s.rmse.mean,
                s.rmse.std,
                s.rmae.mean,
                s.rmae.std,
                s.d_eff.mean,
                s.d_eff.std,
                s.bound.mean,
                s.bound.std,
                s.energy_drop.map(|x| x.to_string()).unwrap_or_default()
            ));
        }
        out
    }
}

/// Trains and evaluates one case under one seed.
pub fn run_case(
    base: &TrainConfig,
    case: Case,
    seed: u64,
    train: &[SyntheticSample],
    test: &[SyntheticSample],
) -> Result<AblationRow> {
    let config = TrainConfig { seed, ..base.clone() }.with_case(case);
    let outcome = Trainer::new(config, train)?.run()?;
    let metrics = evaluate(&outcome.checkpoint, test)?;
    let images: Vec<&[f64]> = test.iter().map(|s| s.image.as_slice()).collect();
    let features = visual_features(&outcome.checkpoint, &images)?;
    let rademacher = RademacherEstimate::from_features(&features, D_EFF_THRESHOLD)?;
    log::info!("case {case} seed {seed}: srcc {:.4} pcc {:.4}", metrics.srcc, metrics.pcc);
    Ok(AblationRow {
        case,
        seed,
        metrics,
        rademacher,
        energy_first: outcome.alignment.first().map(|p| p.energy_distance),
        energy_final: outcome.alignment.last().map(|p| p.energy_distance),
    })
}

/// Every case under every seed with identical data and data order. Rows
/// come back ordered by case, then seed, whether or not they ran in
/// parallel.
pub fn ablate(
    base: &TrainConfig,
    train: &[SyntheticSample],
    test: &[SyntheticSample],
    cases: &[Case],
    seeds: &[u64],
    parallel: bool,
) -> Result<AblationReport> {
    let jobs: Vec<(Case, u64)> = cases
        .iter()
        .flat_map(|&c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let rows: Vec<AblationRow> = if parallel {
        jobs.par_iter()
            .map(|&(c, s)| run_case(base, c, s, train, test))
            .collect::<Result<_>>()?
    } else {
        jobs.iter()
            .map(|&(c, s)| run_case(base, c, s, train, test))
            .collect::<Result<_>>()?
    };
    let summary = cases
        .iter()
        .map(|&case| {
            let rs: Vec<&AblationRow> = rows.iter().filter(|r| r.case == case).collect();
            let col = |f: &dyn Fn(&AblationRow) -> f64| MeanStd::of(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            let pairs: Vec<(f64, f64)> = rs
                .iter()
                .filter_map(|r| Some((r.energy_first?, r.energy_final?)))
                .collect();
            let energy_drop = (!pairs.is_empty()).then(|| {
                let first = pairs.iter().map(|p| p.0).sum::<f64>();
                let last = pairs.iter().map(|p| p.1).sum::<f64>();
                1.0 - last / first
            });
            CaseSummary {
                case,
                seeds: rs.len(),
                srcc: col(&|r| r.metrics.srcc),
                pcc: col(&|r| r.metrics.pcc),
                rmse: col(&|r| r.metrics.rmse),
                rmae: col(&|r| r.metrics.rmae),
                d_eff: col(&|r| r.rademacher.d_eff as f64),
                bound: col(&|r| r.rademacher.bound),
                energy_drop,
            }
        })
        .collect();
    Ok(AblationReport { rows, summary })
}
