use rayon::prelude::*;

use crate::encoders::{encode_image, predict_score};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::synthdata::SyntheticSample;
use crate::trainer::Checkpoint;

fn check_images(ckpt: &Checkpoint, images: &[&[f64]]) -> Result<usize> {
    let g = ckpt.config.model.grid;
    if let Some(img) = images.iter().find(|img| img.len() != g * g) {
        return Err(Error::shape(&[img.len()], &[g, g]));
    }
    Ok(g)
}

/// Visual features z_v, in input order. Reads only the vision encoder.
pub fn visual_features(ckpt: &Checkpoint, images: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    let grid = check_images(ckpt, images)?;
    let pooling = ckpt.config.ablation.pooling();
    let vision = &ckpt.params.vision;
    images
        .par_iter()
        .map(|img| encode_image(img, grid, vision, pooling))
        .collect()
}

/// Scores in input order. Only the vision encoder and score head are read;
/// connector, text, momentum and buffer state play no part.
pub fn infer(ckpt: &Checkpoint, images: &[&[f64]]) -> Result<Vec<f64>> {
    let grid = check_images(ckpt, images)?;
    let pooling = ckpt.config.ablation.pooling();
    let (vision, head) = (&ckpt.params.vision, &ckpt.params.head);
    images
        .par_iter()
        .map(|img| predict_score(&encode_image(img, grid, vision, pooling)?, head))
        .collect()
}

pub fn evaluate(ckpt: &Checkpoint, samples: &[SyntheticSample]) -> Result<MetricsReport> {
    let images: Vec<&[f64]> = samples.iter().map(|s| s.image.as_slice()).collect();
    let pred = infer(ckpt, &images)?;
    let gt: Vec<f64> = samples.iter().map(|s| s.gt).collect();
    MetricsReport::compute(&gt, &pred)
}
