//! The training loop, vision-only inference and the ablation sweep.

mod ablate;
mod checkpoint;
mod infer;
mod objective;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ablate::{ablate, run_case, AblationReport, AblationRow, CaseSummary, MeanStd, D_EFF_THRESHOLD};
pub use checkpoint::{checkpoint_text, Buffers, Checkpoint, TrainableParams};
pub use infer::{evaluate, infer, visual_features};
pub use objective::{objective, Batch, EalInputs, LossBreakdown, ObjectiveOptions};
pub use train::{AlignmentPoint, IterationLog, TrainOutcome, Trainer};

use crate::alignment::AlignmentConfig;
use crate::encoders::{ModelDims, Pooling};
use crate::error::{Error, Result};
use crate::numerics::AdamConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimConfig {
    pub lr0: f64,
    pub lr_min: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            lr0: 1e-3,
            lr_min: 2.5e-6,
            weight_decay: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl OptimConfig {
    pub fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }
}

/// Component switches toggled by the ablation cases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ablation {
    pub attn_pool: bool,
    pub eal: bool,
    pub fal: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Case::E.flags()
    }
}

impl Ablation {
    pub fn pooling(&self) -> Pooling {
        if self.attn_pool {
            Pooling::Attention
        } else {
            Pooling::Mean
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    /// Mean pooling, MSE only.
    A,
    /// Attention pooling, MSE only.
    B,
    /// Attention pooling with entropy alignment.
    C,
    /// Attention pooling with feature alignment.
    D,
    /// Everything.
    E,
}

impl Case {
    pub const ALL: [Case; 5] = [Case::A, Case::B, Case::C, Case::D, Case::E];

    pub fn flags(self) -> Ablation {
        let (attn_pool, eal, fal) = match self {
            Case::A => (false, false, false),
            Case::B => (true, false, false),
            Case::C => (true, true, false),
            Case::D => (true, false, true),
            Case::E => (true, true, true),
        };
        Ablation { attn_pool, eal, fal }
    }

    pub fn label(self) -> char {
        match self {
            Case::A => 'a',
            Case::B => 'b',
            Case::C => 'c',
            Case::D => 'd',
            Case::E => 'e',
        }
    }

    /// Parses a comma-separated list such as `a,b,e`.
    pub fn parse_list(s: &str) -> Result<Vec<Case>> {
        s.split(',').map(|t| t.trim().parse()).collect()
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Case::A),
            "b" => Ok(Case::B),
            "c" => Ok(Case::C),
            "d" => Ok(Case::D),
            "e" => Ok(Case::E),
            _ => Err(Error::Config(format!("unknown ablation case '{s}', expected one of a..e"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Seeds the frozen caption embedder. Kept apart from `seed` so every
    /// run shares one text encoder.
    pub text_seed: u64,
    pub optim: OptimConfig,
    pub alignment: AlignmentConfig,
    pub model: ModelDims,
    pub ablation: Ablation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 32,
            seed: 42,
            text_seed: 0,
            optim: OptimConfig::default(),
            alignment: AlignmentConfig::default(),
            model: ModelDims::default(),
            ablation: Ablation::default(),
        }
    }
}

impl TrainConfig {
    /// Desk-scale settings: M = 256, r = 8.
    pub fn benchmark() -> Self {
        TrainConfig {
            alignment: AlignmentConfig {
                buffer_capacity: 256,
                refresh_step: 8,
                ..AlignmentConfig::default()
            },
            ..TrainConfig::default()
        }
    }

    pub fn with_case(mut self, case: Case) -> Self {
        self.ablation = case.flags();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("train.epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be at least 1".into()));
        }
        let o = &self.optim;
        if !(o.lr0 >= 0.0 && o.lr0.is_finite()) || !(o.lr_min >= 0.0) || o.lr_min > o.lr0 {
            return Err(Error::Config("train.optim needs 0 <= lr_min <= lr0".into()));
        }
        if !(o.weight_decay >= 0.0) || !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) || !(o.eps > 0.0) {
            return Err(Error::Config(
                "train.optim needs weight_decay >= 0, betas in [0, 1), eps > 0".into(),
            ));
        }
        self.alignment.validate()?;
        self.model.validate()
    }

    pub fn batches_per_epoch(&self, n_samples: usize) -> usize {
        n_samples.div_ceil(self.batch_size)
    }

    pub fn total_steps(&self, n_samples: usize) -> u64 {
        (self.epochs * self.batches_per_epoch(n_samples)) as u64
    }
}
