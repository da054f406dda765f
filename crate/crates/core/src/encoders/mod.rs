//! Toy stand-ins for the model components: a patch-token vision encoder
//! with learnable attention pooling, a frozen bag-of-tokens caption
//! embedder, the vision→text connector used only while training, and the
//! MLP score head.

mod connector;
mod head;
mod pool;
mod text;
mod vision;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use connector::{project_visual, ConnectorParams};
pub use head::{predict_score, HeadTrace, ScoreHeadParams};
pub use pool::{attention_pool, attention_pool_backward, mean_pool, PoolOutput};
pub use text::{embed_caption, TextEmbedderParams};
pub use vision::{encode_image, encode_image_traced, VisionEncoderParams, VisionTrace};

/// How spatial tokens are reduced to one vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Single learnable query, scaled dot-product weights.
    Attention,
    /// Unweighted token mean; the query is ignored.
    Mean,
}

/// Every shape in the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelDims {
    /// Image side length G.
    pub grid: usize,
    /// Patch side length P; G must be a multiple of P.
    pub patch: usize,
    pub d_tok: usize,
    /// Width of the per-token MLP.
    pub d_hidden: usize,
    pub d_visual: usize,
    pub d_text: usize,
    /// Width of the score head's hidden layer.
    pub head_hidden: usize,
    pub vocab: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            grid: 32,
            patch: 8,
            d_tok: 32,
            d_hidden: 64,
            d_visual: 64,
            d_text: 32,
            head_hidden: 64,
            vocab: crate::synthdata::GenConfig::default().vocabulary().size(),
        }
    }
}

/// Upper bound on every model dimension, grid side included.
pub const MAX_DIM: usize = 4096;

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        if self.patch == 0 || self.grid == 0 || self.grid % self.patch != 0 {
            return Err(Error::PatchGridMismatch {
                grid: self.grid,
                patch: self.patch,
            });
        }
        let named = [
            ("grid", self.grid),
            ("d_tok", self.d_tok),
            ("d_hidden", self.d_hidden),
            ("d_visual", self.d_visual),
            ("d_text", self.d_text),
            ("head_hidden", self.head_hidden),
            ("vocab", self.vocab),
        ];
        for (name, v) in named {
            if v == 0 || v > MAX_DIM {
                return Err(Error::Config(format!("model.{name} must lie in 1..={MAX_DIM}, got {v}")));
            }
        }
        Ok(())
    }

    pub fn tokens_per_image(&self) -> usize {
        (self.grid / self.patch).pow(2)
    }
}
