use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alignment::{EntropyBuffer, MomentumModel};
use crate::encoders::{ConnectorParams, ScoreHeadParams, TextEmbedderParams, VisionEncoderParams};
use crate::error::{Error, Result};
use crate::numerics::{AdamState, ParamGroup, Prng, Tensor};
use crate::trainer::TrainConfig;

/// Everything the optimizer updates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainableParams {
    pub vision: VisionEncoderParams,
    pub connector: ConnectorParams,
    pub head: ScoreHeadParams,
}

impl ParamGroup for TrainableParams {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut v = self.vision.tensors();
        v.push(&self.connector.weight);
        v.extend(self.head.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.vision.tensors_mut();
        v.push(&mut self.connector.weight);
        v.extend(self.head.tensors_mut());
        v
    }
}

impl TrainableParams {
    /// Each group draws from its own substream of `seed`.
    pub fn init(config: &TrainConfig) -> Self {
        let root = Prng::new(config.seed);
        let dims = &config.model;
        TrainableParams {
            vision: VisionEncoderParams::init(dims, &mut root.substream("init/vision")),
            connector: ConnectorParams::init(dims, &mut root.substream("init/connector")),
            head: ScoreHeadParams::init(dims, &mut root.substream("init/head")),
        }
    }

    pub fn zeros_like(&self) -> Self {
        TrainableParams {
            vision: self.vision.zeros_like(),
            connector: self.connector.zeros_like(),
            head: self.head.zeros_like(),
        }
    }
}

pub fn checkpoint_text(config: &TrainConfig) -> TextEmbedderParams {
    TextEmbedderParams::init(&config.model, &mut Prng::new(config.text_seed).substream("init/text"))
}

fn same_shapes(got: &[&Tensor], want: &[&Tensor], what: &str) -> Result<()> {
    if got.len() != want.len() {
        return Err(Error::MalformedCheckpoint(format!(
            "{what}: {} tensors, expected {}",
            got.len(),
            want.len()
        )));
    }
    for (g, w) in got.iter().zip(want) {
        if g.shape() != w.shape() {
            return Err(Error::MalformedCheckpoint(format!(
                "{what}: tensor shape {:?}, expected {:?}",
                g.shape(),
                w.shape()
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Buffers {
    pub visual: EntropyBuffer,
    pub text: EntropyBuffer,
}

/// Full training state. Resuming from it reproduces an uninterrupted run
/// bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub params: TrainableParams,
    pub text: TextEmbedderParams,
    pub momentum: MomentumModel<TrainableParams>,
    pub adam: AdamState,
    pub buffers: Buffers,
    /// Completed optimizer steps.
    pub step: u64,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::MalformedCheckpoint(e.to_string()))
    }

    /// Parses and checks every shape against the embedded config.
    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint =
            serde_json::from_str(text).map_err(|e| Error::MalformedCheckpoint(e.to_string()))?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.config
            .validate()
            .map_err(|e| Error::MalformedCheckpoint(format!("config: {e}")))?;
        let dims = &self.config.model;
        // Shape templates only; the values are irrelevant.
        let mut rng = Prng::new(0);
        let template = TrainableParams {
            vision: VisionEncoderParams::init(dims, &mut rng),
            connector: ConnectorParams::init(dims, &mut rng),
            head: ScoreHeadParams::init(dims, &mut rng),
        };
        let want = template.tensors();
        same_shapes(&self.params.tensors(), &want, "params")?;
        same_shapes(&self.momentum.params.tensors(), &want, "momentum")?;
        same_shapes(&self.adam.first_moment.iter().collect::<Vec<_>>(), &want, "adam first moment")?;
        same_shapes(&self.adam.second_moment.iter().collect::<Vec<_>>(), &want, "adam second moment")?;
        if self.adam.step_count != self.step {
            return Err(Error::MalformedCheckpoint(format!(
                "optimizer has taken {} steps but the checkpoint records {}",
                self.adam.step_count, self.step
            )));
        }
        let text = TextEmbedderParams::init(dims, &mut rng);
        let mut want_text = vec![&text.token_table];
        want_text.extend(text.mix_proj.tensors());
        let mut got_text = vec![&self.text.token_table];
        got_text.extend(self.text.mix_proj.tensors());
        same_shapes(&got_text, &want_text, "text")?;
        if !(self.momentum.momentum > 0.0 && self.momentum.momentum < 1.0) {
            return Err(Error::MalformedCheckpoint("momentum outside (0, 1)".into()));
        }
        let m = self.config.alignment.buffer_capacity;
        if self.buffers.visual.capacity() != m || self.buffers.text.capacity() != m {
            return Err(Error::MalformedCheckpoint(format!(
                "buffer capacities ({}, {}) differ from configured {m}",
                self.buffers.visual.capacity(),
                self.buffers.text.capacity()
            )));
        }
        Ok(())
    }
}
