use serde::{Deserialize, Serialize};

use crate::encoders::{attention_pool, attention_pool_backward, mean_pool, ModelDims, Pooling};
use crate::error::{Error, Result};
use crate::numerics::{Linear, Prng, Tensor};

/// Patch embedding → residual token MLP → pooling → output projection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisionEncoderParams {
    /// P² → D_tok
    pub patch_embed: Linear,
    /// D_tok → D_h
    pub mlp_in: Linear,
    /// D_h → D_tok
    pub mlp_out: Linear,
    /// D_tok
    pub pool_query: Tensor,
    /// D_tok → D_v
    pub out_proj: Linear,
}

impl VisionEncoderParams {
    pub fn init(dims: &ModelDims, rng: &mut Prng) -> Self {
        let patch_dim = dims.patch * dims.patch;
        VisionEncoderParams {
            patch_embed: Linear::init(patch_dim, dims.d_tok, true, rng),
            mlp_in: Linear::init(dims.d_tok, dims.d_hidden, true, rng),
            mlp_out: Linear::init(dims.d_hidden, dims.d_tok, true, rng),
            pool_query: Tensor::randn(&[dims.d_tok], (1.0 / dims.d_tok as f64).sqrt(), rng),
            out_proj: Linear::init(dims.d_tok, dims.d_visual, true, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        VisionEncoderParams {
            patch_embed: self.patch_embed.zeros_like(),
            mlp_in: self.mlp_in.zeros_like(),
            mlp_out: self.mlp_out.zeros_like(),
            pool_query: Tensor::zeros(self.pool_query.shape()),
            out_proj: self.out_proj.zeros_like(),
        }
    }

    pub fn patch_size(&self) -> usize {
        (self.patch_embed.in_dim() as f64).sqrt().round() as usize
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut v = self.patch_embed.tensors();
        v.extend(self.mlp_in.tensors());
        v.extend(self.mlp_out.tensors());
        v.push(&self.pool_query);
        v.extend(self.out_proj.tensors());
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.patch_embed.tensors_mut();
        v.extend(self.mlp_in.tensors_mut());
        v.extend(self.mlp_out.tensors_mut());
        v.push(&mut self.pool_query);
        v.extend(self.out_proj.tensors_mut());
        v
    }
}

/// Intermediate values kept for the backward pass.
#[derive(Clone, Debug)]
pub struct VisionTrace {
    pub patches: Vec<Vec<f64>>,
    pub embeds: Vec<Vec<f64>>,
    /// tanh activations of the token MLP.
    pub hidden: Vec<Vec<f64>>,
    pub tokens: Vec<Vec<f64>>,
    pub pool_weights: Vec<f64>,
    pub pooled: Vec<f64>,
    pub pooling: Pooling,
    pub z: Vec<f64>,
}

/// Splits a row-major G×G image into row-major P×P patches, patch grid
/// traversed row by row.
fn extract_patches(image: &[f64], grid: usize, patch: usize) -> Result<Vec<Vec<f64>>> {
    if patch == 0 || grid % patch != 0 {
        return Err(Error::PatchGridMismatch { grid, patch });
    }
    if image.len() != grid * grid {
        return Err(Error::shape(&[image.len()], &[grid, grid]));
    }
    let per_side = grid / patch;
    let mut patches = Vec::with_capacity(per_side * per_side);
    for pr in 0..per_side {
        for pc in 0..per_side {
            let mut p = Vec::with_capacity(patch * patch);
            for r in 0..patch {
                let start = (pr * patch + r) * grid + pc * patch;
                p.extend_from_slice(&image[start..start + patch]);
            }
            patches.push(p);
        }
    }
    Ok(patches)
}

pub fn encode_image(
    image: &[f64],
    grid: usize,
    params: &VisionEncoderParams,
    pooling: Pooling,
) -> Result<Vec<f64>> {
    Ok(encode_image_traced(image, grid, params, pooling)?.z)
}

pub fn encode_image_traced(
    image: &[f64],
    grid: usize,
    params: &VisionEncoderParams,
    pooling: Pooling,
) -> Result<VisionTrace> {
    let patch = params.patch_size();
    if patch * patch != params.patch_embed.in_dim() {
        return Err(Error::shape(params.patch_embed.weight.shape(), &[patch * patch]));
    }
    let patches = extract_patches(image, grid, patch)?;
    let mut embeds = Vec::with_capacity(patches.len());
    let mut hidden = Vec::with_capacity(patches.len());
    let mut tokens = Vec::with_capacity(patches.len());
    for p in &patches {
        let e = params.patch_embed.forward(p)?;
        let h: Vec<f64> = params.mlp_in.forward(&e)?.into_iter().map(f64::tanh).collect();
        let delta = params.mlp_out.forward(&h)?;
        let t: Vec<f64> = e.iter().zip(&delta).map(|(a, b)| a + b).collect();
        embeds.push(e);
        hidden.push(h);
        tokens.push(t);
    }
    let pool = match pooling {
        Pooling::Attention => attention_pool(&tokens, params.pool_query.data())?,
        Pooling::Mean => mean_pool(&tokens)?,
    };
    let z = params.out_proj.forward(&pool.pooled)?;
    Ok(VisionTrace {
        patches,
        embeds,
        hidden,
        tokens,
        pool_weights: pool.weights,
        pooled: pool.pooled,
        pooling,
        z,
    })
}

impl VisionTrace {
    /// Accumulates ∂L/∂params into `grads` given ∂L/∂z.
    pub fn backward(&self, params: &VisionEncoderParams, grad_z: &[f64], grads: &mut VisionEncoderParams) {
        let grad_pooled = params.out_proj.backward(&self.pooled, grad_z, &mut grads.out_proj);
        let grad_tokens: Vec<Vec<f64>> = match self.pooling {
            Pooling::Attention => {
                let (gt, gq) = attention_pool_backward(
                    &self.tokens,
                    params.pool_query.data(),
                    &self.pool_weights,
                    &grad_pooled,
                );
                for (acc, g) in grads.pool_query.data_mut().iter_mut().zip(&gq) {
                    *acc += g;
                }
                gt
            }
            Pooling::Mean => self
                .pool_weights
                .iter()
                .map(|&a| grad_pooled.iter().map(|g| a * g).collect())
                .collect(),
        };
        for (i, gt) in grad_tokens.iter().enumerate() {
            let grad_h = params.mlp_out.backward(&self.hidden[i], gt, &mut grads.mlp_out);
            let grad_pre: Vec<f64> = grad_h
                .iter()
                .zip(&self.hidden[i])
                .map(|(g, h)| g * (1.0 - h * h))
                .collect();
            let via_mlp = params.mlp_in.backward(&self.embeds[i], &grad_pre, &mut grads.mlp_in);
            let grad_e: Vec<f64> = gt.iter().zip(&via_mlp).map(|(a, b)| a + b).collect();
            params
                .patch_embed
                .backward(&self.patches[i], &grad_e, &mut grads.patch_embed);
        }
    }
}
