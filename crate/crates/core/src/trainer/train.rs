use serde::{Deserialize, Serialize};

use crate::alignment::{
    buffer_refresh, eal_ready, energy_distance, feature_entropy, EntropyBuffer, MomentumModel,
};
use crate::encoders::{embed_caption, encode_image, project_visual, Pooling};
use crate::error::{Error, Result};
use crate::numerics::{adam_step, cosine_lr, AdamState, ParamGroup, Prng};
use crate::synthdata::SyntheticSample;
use crate::trainer::checkpoint::Buffers;
use crate::trainer::checkpoint_text;
use crate::trainer::{objective, Batch, Checkpoint, EalInputs, ObjectiveOptions, TrainConfig, TrainableParams};

/// One row of the per-iteration log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    /// 1-based.
    pub iter: u64,
    pub lr: f64,
    pub mse: f64,
    pub eal: f64,
    pub fal: f64,
    pub total: f64,
    pub buffer_visual: usize,
    pub buffer_text: usize,
}

impl IterationLog {
    pub const CSV_HEADER: &'static str = "iter,lr,L_mse,L_eal,L_fal,L_total,|B_v|,|B_s|";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.iter, self.lr, self.mse, self.eal, self.fal, self.total, self.buffer_visual, self.buffer_text
        )
    }
}

/// Energy distance between the two buffers after an iteration's refresh,
/// recorded once the gate is open.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentPoint {
    pub iter: u64,
    pub energy_distance: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub log: Vec<IterationLog>,
    pub alignment: Vec<AlignmentPoint>,
}

/// Sequential training loop over a fixed dataset.
pub struct Trainer<'a> {
    data: &'a [SyntheticSample],
    text_features: Vec<Vec<f64>>,
    text_entropies: Vec<f64>,
    state: Checkpoint,
    total_steps: u64,
    order: Option<(u64, Vec<usize>)>,
}

/// Entropy of the joint-space projection W_v f_v(image).
fn visual_entropy(params: &TrainableParams, image: &[f64], grid: usize, pooling: Pooling) -> Result<f64> {
    let z = encode_image(image, grid, &params.vision, pooling)?;
    feature_entropy(&project_visual(&z, &params.connector)?)
}

fn is_numerical(e: &Error) -> bool {
    matches!(
        e,
        Error::NonFiniteInput | Error::NonFiniteGradient | Error::NonFiniteComponent(_) | Error::ZeroNorm
    )
}

impl<'a> Trainer<'a> {
    pub fn new(config: TrainConfig, data: &'a [SyntheticSample]) -> Result<Self> {
        config.validate()?;
        let params = TrainableParams::init(&config);
        let momentum = MomentumModel::from_live(&params, config.alignment.momentum);
        let adam = AdamState::new(&params.tensors());
        let m = config.alignment.buffer_capacity;
        let state = Checkpoint {
            text: checkpoint_text(&config),
            params,
            momentum,
            adam,
            buffers: Buffers {
                visual: EntropyBuffer::new(m)?,
                text: EntropyBuffer::new(m)?,
            },
            step: 0,
            config,
        };
        Trainer::resume(state, data)
    }

    /// Continues from a checkpoint. The dataset must be the one it was
    /// trained on.
    pub fn resume(state: Checkpoint, data: &'a [SyntheticSample]) -> Result<Self> {
        state.validate()?;
        if data.is_empty() {
            return Err(Error::InvalidArgument("training set is empty".into()));
        }
        let g = state.config.model.grid;
        if let Some((i, s)) = data.iter().enumerate().find(|(_, s)| s.image.len() != g * g) {
            return Err(Error::Config(format!(
                "sample {i} has {} pixels but the model expects a {g}x{g} grid",
                s.image.len()
            )));
        }
        let text_features = data
            .iter()
            .map(|s| embed_caption(&s.caption, &state.text))
            .collect::<Result<Vec<_>>>()?;
        let text_entropies = text_features
            .iter()
            .map(|z| feature_entropy(z))
            .collect::<Result<Vec<_>>>()?;
        let total_steps = state.config.total_steps(data.len());
        Ok(Trainer {
            data,
            text_features,
            text_entropies,
            state,
            total_steps,
            order: None,
        })
    }

    pub fn checkpoint(&self) -> &Checkpoint {
        &self.state
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn is_finished(&self) -> bool {
        self.state.step >= self.total_steps
    }

    /// Frozen caption embeddings, one per training sample.
    pub fn text_features(&self) -> &[Vec<f64>] {
        &self.text_features
    }

    fn batch_indices(&mut self) -> Vec<usize> {
        let bpe = self.state.config.batches_per_epoch(self.data.len()) as u64;
        let epoch = self.state.step / bpe;
        let pos = (self.state.step % bpe) as usize;
        if self.order.as_ref().map(|(e, _)| *e) != Some(epoch) {
            let mut order: Vec<usize> = (0..self.data.len()).collect();
            Prng::new(self.state.config.seed)
                .substream_indexed("shuffle", epoch)
                .shuffle(&mut order);
            self.order = Some((epoch, order));
        }
        let order = &self.order.as_ref().expect("order set above").1;
        let bs = self.state.config.batch_size;
        order[pos * bs..((pos + 1) * bs).min(order.len())].to_vec()
    }

    /// Runs one iteration. On failure the state is left as it was before
    /// the call; numerical failures come back as `NumericalAbort` carrying
    /// that state.
    pub fn step(&mut self) -> Result<(IterationLog, Option<AlignmentPoint>)> {
        if self.is_finished() {
            return Err(Error::StepBeyondHorizon {
                step: self.state.step + 1,
                total: self.total_steps,
            });
        }
        let idx = self.batch_indices();
        let backup = self.state.clone();
        match self.step_inner(&idx) {
            Ok(out) => Ok(out),
            Err(e) => {
                self.state = backup;
                if is_numerical(&e) {
                    Err(Error::NumericalAbort {
                        iteration: self.state.step + 1,
                        reason: e.to_string(),
                        last_good: Box::new(self.state.clone()),
                    })
                } else {
                    Err(e)
                }
            }
        }
    }

    fn step_inner(&mut self, idx: &[usize]) -> Result<(IterationLog, Option<AlignmentPoint>)> {
        let data = self.data;
        let text_entropies = &self.text_entropies;
        let st = &mut self.state;
        let cfg = &st.config;
        let grid = cfg.model.grid;
        let pooling = cfg.ablation.pooling();
        let al = &cfg.alignment;

        // Momentum-model entropies for the incoming batch.
        let mut new_v = Vec::with_capacity(idx.len());
        let mut new_s = Vec::with_capacity(idx.len());
        for &i in idx {
            new_v.push((i as u64, visual_entropy(&st.momentum.params, &data[i].image, grid, pooling)?));
            new_s.push((i as u64, text_entropies[i]));
        }
        st.buffers.visual.push(&new_v);
        st.buffers.text.push(&new_s);
        let ready = eal_ready(&st.buffers.visual, &st.buffers.text, al.buffer_capacity);

        let detached = st.buffers.visual.entropies();
        let mut text_sample = st.buffers.text.entropies();
        text_sample.extend(idx.iter().map(|&i| text_entropies[i]));
        let opts = ObjectiveOptions {
            grid,
            pooling,
            eal: (cfg.ablation.eal && ready).then_some(EalInputs {
                detached_visual: &detached,
                text: &text_sample,
            }),
            fal: cfg.ablation.fal,
            lambda: al.lambda,
            gamma: al.gamma,
            temperature: al.temperature,
        };
        let batch = Batch {
            images: idx.iter().map(|&i| data[i].image.as_slice()).collect(),
            targets: idx.iter().map(|&i| data[i].gt).collect(),
            text_features: idx.iter().map(|&i| self.text_features[i].as_slice()).collect(),
        };
        let (loss, grads) = objective(&st.params, &batch, &opts)?;

        let lr = cosine_lr(st.step, self.total_steps, cfg.optim.lr0, cfg.optim.lr_min)?;
        let adam_cfg = cfg.optim.adam(lr);
        adam_step(&mut st.params.tensors_mut(), &grads.tensors(), &mut st.adam, &adam_cfg)?;
        if st.params.tensors().iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        st.momentum.update(&st.params)?;

        let mom = &st.momentum.params;
        buffer_refresh(&mut st.buffers.visual, al.refresh_step, |id| {
            let s = data.get(id as usize).ok_or(Error::UnknownSample(id))?;
            visual_entropy(mom, &s.image, grid, pooling)
        })?;
        buffer_refresh(&mut st.buffers.text, al.refresh_step, |id| {
            text_entropies.get(id as usize).copied().ok_or(Error::UnknownSample(id))
        })?;

        st.step += 1;
        let point = if ready {
            Some(AlignmentPoint {
                iter: st.step,
                energy_distance: energy_distance(&st.buffers.visual.entropies(), &st.buffers.text.entropies())?,
            })
        } else {
            None
        };
        let log = IterationLog {
            iter: st.step,
            lr,
            mse: loss.mse,
            eal: loss.eal,
            fal: loss.fal,
            total: loss.total,
            buffer_visual: st.buffers.visual.len(),
            buffer_text: st.buffers.text.len(),
        };
        log::debug!(
            "iter {} lr {:.3e} mse {:.5} eal {:.5} fal {:.5}",
            log.iter,
            log.lr,
            log.mse,
            log.eal,
            log.fal
        );
        Ok((log, point))
    }

    /// Runs `n` iterations (fewer if the schedule ends first).
    pub fn run_steps(&mut self, n: u64, log: &mut Vec<IterationLog>, alignment: &mut Vec<AlignmentPoint>) -> Result<()> {
        for _ in 0..n {
            if self.is_finished() {
                break;
            }
            let (row, point) = self.step()?;
            log.push(row);
            alignment.extend(point);
        }
        Ok(())
    }

    /// Trains to the end of the schedule.
    pub fn run(mut self) -> Result<TrainOutcome> {
        let mut log = Vec::new();
        let mut alignment = Vec::new();
        let bpe = self.state.config.batches_per_epoch(self.data.len()) as u64;
        while !self.is_finished() {
            self.run_steps(bpe, &mut log, &mut alignment)?;
            if let Some(last) = log.last() {
                log::info!(
                    "epoch {}/{}: mse {:.5} total {:.5}",
                    last.iter.div_ceil(bpe),
                    self.state.config.epochs,
                    last.mse,
                    last.total
                );
            }
        }
        Ok(TrainOutcome {
            checkpoint: self.state,
            log,
            alignment,
        })
    }
}
