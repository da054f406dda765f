use serde::{Deserialize, Serialize};

use crate::encoders::ModelDims;
use crate::error::{Error, Result};
use crate::numerics::{Linear, Prng, Tensor};

/// Frozen caption embedder: random token table plus a mixing projection
/// over the token-bag mean. Never updated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextEmbedderParams {
    /// vocab × D_t
    pub token_table: Tensor,
    /// D_t → D_t
    pub mix_proj: Linear,
}

impl TextEmbedderParams {
    pub fn init(dims: &ModelDims, rng: &mut Prng) -> Self {
        TextEmbedderParams {
            token_table: Tensor::randn(&[dims.vocab, dims.d_text], 1.0, rng),
            mix_proj: Linear::init(dims.d_text, dims.d_text, true, rng),
        }
    }

    pub fn vocab(&self) -> usize {
        self.token_table.rows()
    }

    pub fn dim(&self) -> usize {
        self.token_table.cols()
    }
}

/// `mix_proj(mean of token embeddings)`. An empty caption embeds to the
/// zero vector.
pub fn embed_caption(tokens: &[u32], params: &TextEmbedderParams) -> Result<Vec<f64>> {
    let vocab = params.vocab();
    if let Some(&id) = tokens.iter().find(|&&id| id as usize >= vocab) {
        return Err(Error::OutOfVocab { id, vocab });
    }
    if tokens.is_empty() {
        return Ok(vec![0.0; params.dim()]);
    }
    let mut mean = vec![0.0; params.dim()];
    for &id in tokens {
        for (m, v) in mean.iter_mut().zip(params.token_table.row(id as usize)) {
            *m += v;
        }
    }
    let n = tokens.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    params.mix_proj.forward(&mean)
}
