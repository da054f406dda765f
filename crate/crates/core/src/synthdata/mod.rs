//! Procedural (image, caption, complexity) triples.
//!
//! Complexity is a transparent linear score of object count, distinct
//! categories and noise. Captions list the scene facets plus a quantized
//! complexity bucket, so the text channel carries the label signal by
//! construction.

mod io;
mod scene;

pub use io::{parse_dataset, read_dataset, write_dataset};
pub use scene::{caption, generate_dataset, generate_sample, gt_complexity, render, SceneSpec, SyntheticSample};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower and upper clamp margin on ground truth.
pub const GT_EPSILON: f64 = 1e-3;

/// Number of complexity-bucket tokens.
pub const N_BUCKETS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenConfig {
    /// Image side length.
    pub grid: usize,
    /// Maximum number of objects per scene (K_max).
    pub max_objects: usize,
    /// Number of object categories (C_max).
    pub n_categories: usize,
    pub n_backgrounds: usize,
    /// Weights of (count, distinct categories, noise) in the ground truth.
    pub weights: [f64; 3],
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            grid: 32,
            max_objects: 8,
            n_categories: 6,
            n_backgrounds: 4,
            weights: [0.5, 0.25, 0.25],
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid < 4 {
            return Err(Error::Config("generator.grid must be at least 4".into()));
        }
        if self.max_objects == 0 || self.n_categories == 0 || self.n_backgrounds == 0 {
            return Err(Error::Config(
                "generator.max_objects, n_categories and n_backgrounds must be positive".into(),
            ));
        }
        check_weights(&self.weights)
    }

    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary {
            n_counts: self.max_objects + 1,
            n_categories: self.n_categories,
            n_backgrounds: self.n_backgrounds,
        }
    }
}

pub(crate) fn check_weights(w: &[f64; 3]) -> Result<()> {
    if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "complexity weights must be non-negative and sum to 1, got {w:?}"
        )));
    }
    Ok(())
}

/// Caption token layout: `[count | category | background | bucket]` blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    pub n_counts: usize,
    pub n_categories: usize,
    pub n_backgrounds: usize,
}

impl Vocabulary {
    pub fn size(&self) -> usize {
        self.n_counts + self.n_categories + self.n_backgrounds + N_BUCKETS
    }

    pub fn count_token(&self, n: usize) -> u32 {
        n as u32
    }

    pub fn category_token(&self, c: usize) -> u32 {
        (self.n_counts + c) as u32
    }

    pub fn background_token(&self, b: usize) -> u32 {
        (self.n_counts + self.n_categories + b) as u32
    }

    pub fn bucket_token(&self, bucket: usize) -> u32 {
        (self.n_counts + self.n_categories + self.n_backgrounds + bucket) as u32
    }
}

/// Decile of a value in (0, 1), clamped to 0..=9.
pub fn bucket_of(gt: f64) -> usize {
    ((gt * N_BUCKETS as f64).floor().max(0.0) as usize).min(N_BUCKETS - 1)
}

/// Counts per decile of gt.
pub fn decile_histogram(samples: &[SyntheticSample]) -> [usize; N_BUCKETS] {
    let mut h = [0; N_BUCKETS];
    for s in samples {
        h[bucket_of(s.gt)] += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_blocks_are_disjoint() {
        let v = GenConfig::default().vocabulary();
        assert_eq!(v.size(), 29);
        assert_eq!(v.count_token(8), 8);
        assert_eq!(v.category_token(0), 9);
        assert_eq!(v.background_token(0), 15);
        assert_eq!(v.bucket_token(9), 28);
    }

    #[test]
    fn buckets() {
        assert_eq!(bucket_of(0.001), 0);
        assert_eq!(bucket_of(0.1), 1);
        assert_eq!(bucket_of(0.999), 9);
        assert_eq!(bucket_of(1.0), 9);
    }

    #[test]
    fn weight_simplex() {
        assert!(check_weights(&[0.5, 0.25, 0.25]).is_ok());
        assert!(check_weights(&[0.5, 0.5, 0.5]).is_err());
        assert!(check_weights(&[1.5, -0.5, 0.0]).is_err());
    }
}
