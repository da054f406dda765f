use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Prng;
use crate::synthdata::{bucket_of, check_weights, GenConfig, GT_EPSILON};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub n_objects: usize,
    pub object_categories: Vec<usize>,
    pub noise_level: f64,
    pub background_id: usize,
    /// Seeds object placement and pixel noise when rendering.
    pub seed: u64,
}

impl SceneSpec {
    /// Draws every facet from `seed`: object count uniform on 0..=K_max,
    /// categories and background uniform, noise uniform on [0, 1).
    pub fn from_seed(seed: u64, config: &GenConfig) -> Self {
        let mut rng = Prng::new(seed).substream("scene");
        let n_objects = rng.below(config.max_objects + 1);
        let object_categories = (0..n_objects).map(|_| rng.below(config.n_categories)).collect();
        let background_id = rng.below(config.n_backgrounds);
        let noise_level = rng.uniform();
        SceneSpec {
            n_objects,
            object_categories,
            noise_level,
            background_id,
            seed,
        }
    }

    pub fn distinct_categories(&self) -> usize {
        self.object_categories.iter().collect::<BTreeSet<_>>().len()
    }

    pub fn validate(&self, config: &GenConfig) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidArgument(m));
        if self.n_objects > config.max_objects {
            return fail(format!("{} objects exceeds maximum {}", self.n_objects, config.max_objects));
        }
        if self.object_categories.len() != self.n_objects {
            return fail(format!(
                "{} categories listed for {} objects",
                self.object_categories.len(),
                self.n_objects
            ));
        }
        if let Some(c) = self.object_categories.iter().find(|&&c| c >= config.n_categories) {
            return fail(format!("category {c} out of range"));
        }
        if self.background_id >= config.n_backgrounds {
            return fail(format!("background {} out of range", self.background_id));
        }
        if !(0.0..=1.0).contains(&self.noise_level) {
            return fail(format!("noise level {} outside [0, 1]", self.noise_level));
        }
        Ok(())
    }
}

/// gt = clamp(w₁·n/K_max + w₂·distinct/C_max + w₃·noise, ε, 1−ε).
pub fn gt_complexity(spec: &SceneSpec, config: &GenConfig, weights: &[f64; 3]) -> Result<f64> {
    check_weights(weights)?;
    let raw = weights[0] * spec.n_objects as f64 / config.max_objects as f64
        + weights[1] * spec.distinct_categories() as f64 / config.n_categories as f64
        + weights[2] * spec.noise_level;
    Ok(raw.clamp(GT_EPSILON, 1.0 - GT_EPSILON))
}

fn background_intensity(id: usize, config: &GenConfig) -> f64 {
    0.1 + 0.3 * id as f64 / config.n_backgrounds.max(2).saturating_sub(1) as f64
}

fn category_intensity(c: usize, config: &GenConfig) -> f64 {
    0.5 + 0.45 * (c + 1) as f64 / config.n_categories as f64
}

/// Rasterizes a scene into a row-major G×G grid in [0, 1].
///
/// Even categories are axis-aligned rectangles, odd ones discs. Noise adds
/// `noise_level·(u − ½)` per pixel from its own stream, so two specs that
/// differ only in noise level share layout and noise draws.
pub fn render(spec: &SceneSpec, config: &GenConfig) -> Vec<f64> {
    let g = config.grid;
    let mut image = vec![background_intensity(spec.background_id, config); g * g];
    let base = Prng::new(spec.seed);
    let mut layout = base.substream("layout");
    let min_size = (g / 8).max(2);
    let max_size = (g / 3).max(min_size + 1);
    for &c in &spec.object_categories {
        let size = min_size + layout.below(max_size - min_size + 1);
        let row0 = layout.below(g - size + 1);
        let col0 = layout.below(g - size + 1);
        let value = category_intensity(c, config);
        let radius = size as f64 / 2.0;
        let (cr, cc) = (row0 as f64 + radius, col0 as f64 + radius);
        for r in row0..row0 + size {
            for col in col0..col0 + size {
                let inside = if c % 2 == 0 {
                    true
                } else {
                    let (dr, dc) = (r as f64 + 0.5 - cr, col as f64 + 0.5 - cc);
                    dr * dr + dc * dc <= radius * radius
                };
                if inside {
                    image[r * g + col] = value;
                }
            }
        }
    }
    let mut noise = base.substream("noise");
    for px in &mut image {
        let u = noise.uniform();
        *px = (*px + spec.noise_level * (u - 0.5)).clamp(0.0, 1.0);
    }
    image
}

/// One count token, one token per object category, one background token
/// and one complexity-bucket token.
pub fn caption(spec: &SceneSpec, gt: f64, config: &GenConfig) -> Vec<u32> {
    let v = config.vocabulary();
    let mut tokens = Vec::with_capacity(spec.n_objects + 3);
    tokens.push(v.count_token(spec.n_objects));
    tokens.extend(spec.object_categories.iter().map(|&c| v.category_token(c)));
    tokens.push(v.background_token(spec.background_id));
    tokens.push(v.bucket_token(bucket_of(gt)));
    tokens
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSample {
    pub seed: u64,
    pub spec: SceneSpec,
    /// Row-major G×G pixels.
    pub image: Vec<f64>,
    pub caption: Vec<u32>,
    pub gt: f64,
}

impl SyntheticSample {
    pub fn from_spec(spec: SceneSpec, config: &GenConfig) -> Result<Self> {
        config.validate()?;
        spec.validate(config)?;
        let gt = gt_complexity(&spec, config, &config.weights)?;
        Ok(SyntheticSample {
            seed: spec.seed,
            image: render(&spec, config),
            caption: caption(&spec, gt, config),
            gt,
            spec,
        })
    }
}

pub fn generate_sample(seed: u64, config: &GenConfig) -> Result<SyntheticSample> {
    SyntheticSample::from_spec(SceneSpec::from_seed(seed, config), config)
}

/// `n` samples whose seeds come from the indexed `split` substream of
/// `seed`. Generation runs in parallel; the output order is by index.
pub fn generate_dataset(seed: u64, split: &str, n: usize, config: &GenConfig) -> Result<Vec<SyntheticSample>> {
    config.validate()?;
    let root = Prng::new(seed);
    (0..n as u64)
        .into_par_iter()
        .map(|i| generate_sample(root.substream_indexed(split, i).seed(), config))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::decile_histogram;

    fn empty_spec(noise: f64) -> SceneSpec {
        SceneSpec {
            n_objects: 0,
            object_categories: vec![],
            noise_level: noise,
            background_id: 1,
            seed: 9,
        }
    }

    fn total_variation(img: &[f64], g: usize) -> f64 {
        let mut tv = 0.0;
        for r in 0..g {
            for c in 0..g {
                if c + 1 < g {
                    tv += (img[r * g + c + 1] - img[r * g + c]).abs();
                }
                if r + 1 < g {
                    tv += (img[(r + 1) * g + c] - img[r * g + c]).abs();
                }
            }
        }
        tv
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = GenConfig::default();
        assert_eq!(generate_sample(17, &cfg).unwrap(), generate_sample(17, &cfg).unwrap());
    }

    #[test]
    fn empty_scene_is_flat() {
        let cfg = GenConfig::default();
        let s = SyntheticSample::from_spec(empty_spec(0.0), &cfg).unwrap();
        assert!(s.image.iter().all(|&p| p == s.image[0]));
        let v = cfg.vocabulary();
        assert_eq!(s.caption[0], v.count_token(0));
        assert_eq!(s.caption.len(), 3);
        assert_eq!(s.gt, GT_EPSILON);
    }

    #[test]
    fn gt_clamps_and_hand_value() {
        let cfg = GenConfig::default();
        let w = cfg.weights;
        let max = SceneSpec {
            n_objects: 8,
            object_categories: vec![0, 1, 2, 3, 4, 5, 0, 1],
            noise_level: 1.0,
            background_id: 0,
            seed: 0,
        };
        assert_eq!(gt_complexity(&max, &cfg, &w).unwrap(), 1.0 - GT_EPSILON);
        let mid = SceneSpec {
            n_objects: 4,
            object_categories: vec![2; 4],
            noise_level: 0.5,
            background_id: 0,
            seed: 0,
        };
        // 0.5·4/8 + 0.25·1/6 + 0.25·0.5 = 0.25 + 1/24 + 0.125
        let expected = 0.375 + 1.0 / 24.0;
        assert!((gt_complexity(&mid, &cfg, &w).unwrap() - expected).abs() < 1e-15);
        assert!(gt_complexity(&mid, &cfg, &[0.5, 0.5, 0.5]).is_err());
    }

    #[test]
    fn noise_changes_total_variation() {
        let cfg = GenConfig::default();
        let mut prev = None;
        for noise in [0.0, 0.2, 0.5, 0.9] {
            let mut spec = SceneSpec::from_seed(3, &cfg);
            spec.noise_level = noise;
            let tv = total_variation(&render(&spec, &cfg), cfg.grid);
            if let Some(p) = prev {
                assert!(tv > p, "{tv} <= {p}");
            }
            prev = Some(tv);
        }
    }

    #[test]
    fn deciles_all_populated() {
        let cfg = GenConfig::default();
        let data = generate_dataset(42, "train", 10_000, &cfg).unwrap();
        let h = decile_histogram(&data);
        assert!(h.iter().all(|&c| c > 0), "{h:?}");
        assert!(data.iter().all(|s| s.gt > 0.0 && s.gt < 1.0));
    }

    #[test]
    fn parallel_equals_serial() {
        let cfg = GenConfig::default();
        let par = generate_dataset(5, "test", 50, &cfg).unwrap();
        let root = Prng::new(5);
        for (i, s) in par.iter().enumerate() {
            let serial = generate_sample(root.substream_indexed("test", i as u64).seed(), &cfg).unwrap();
            assert_eq!(*s, serial);
        }
    }

    #[test]
    fn invalid_spec_rejected() {
        let cfg = GenConfig::default();
        let mut spec = empty_spec(0.0);
        spec.n_objects = 2;
        assert!(SyntheticSample::from_spec(spec, &cfg).is_err());
    }
}
