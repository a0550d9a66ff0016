//! Losses, learning-rate schedule, teacher-forced optimization loops and
//! checkpoints for the three models.
//!
//! A run writes `<model>.metrics.jsonl` (one record per logged step with the
//! loss components and learning rate) and `<model>.ckpt` into its output
//! directory. A non-finite loss stops the run, writes
//! `<model>.diverged.ckpt` and returns [`Error::Diverged`].

mod checkpoint;
mod data;
mod gradcheck;
mod losses;

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audiofeat::AugmentSpec;
use crate::error::{invalid, Error, Result};
use crate::models::{AnyModel, ModelConfig, ModelKind};
use crate::nn::{clip_global_norm, Adam, AdamConfig, Gradients, Graph, Mat, Var};

pub use checkpoint::{Checkpoint, FORMAT_VERSION, MAGIC};
pub use data::{draw_crops, l2l_batch, load_clips, posegen_batch, s2l_batch, stacked_audio, ClipData, Crop};
pub use gradcheck::{gradient_check, relative_error, GradSample};
pub use losses::{
    kl_graph, kl_loss, l1_graph, landmark_weights, lr_schedule, velocity_graph, velocity_loss, weighted_l1,
    weighted_l1_graph,
};


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub warmup_steps: usize,
    pub total_steps: usize,
    pub peak_lr: f64,
    pub start_lr: f64,
    pub lambda_y: f64,
    pub velocity_weight: f64,
    pub kl_weight: f64,
    pub seed: u64,
    pub crop_frames: usize,
    pub clip_norm: f64,
    /// Probability of replacing a batch element's audio with an augmented copy.
    pub augment_prob: f64,
    pub augment: AugmentSpec,
    pub checkpoint_every: usize,
    pub log_every: usize,
}

impl TrainConfig {
    pub fn desk() -> Self {
        TrainConfig {
            batch_size: 32,
            warmup_steps: 500,
            total_steps: 20_000,
            peak_lr: 5e-4,
            start_lr: 1e-5,
            lambda_y: 2.0,
            velocity_weight: 1.0,
            kl_weight: 1e-3,
            seed: 0,
            crop_frames: 90,
            clip_norm: 1.0,
            augment_prob: 0.0,
            augment: AugmentSpec::default(),
            checkpoint_every: 1000,
            log_every: 1,
        }
    }

    pub fn paper() -> Self {
        TrainConfig {
            batch_size: 256,
            warmup_steps: 10_000,
            total_steps: 1_000_000,
            augment_prob: 0.5,
            checkpoint_every: 10_000,
            log_every: 100,
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.warmup_steps >= self.total_steps {
            return Err(invalid!("warmup steps {} must be below total steps {}", self.warmup_steps, self.total_steps));
        }
        let weights = [self.peak_lr, self.start_lr, self.lambda_y, self.velocity_weight, self.kl_weight, self.clip_norm];
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(invalid!("learning rates and loss weights must be finite and ≥ 0"));
        }
        if self.batch_size == 0 || self.crop_frames < 2 {
            return Err(invalid!("batch size must be positive and crops at least 2 frames"));
        }
        if !(0.0..=1.0).contains(&self.augment_prob) {
            return Err(invalid!("augment_prob must lie in [0, 1]"));
        }
        self.augment.validate()
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::desk()
    }
}

/// A training batch for any of the models.
#[derive(Clone, Debug)]
pub enum Batch {
    S2l(crate::models::S2lBatch),
    PoseGen(crate::models::PoseGenBatch),
    L2l(crate::models::L2lBatch),
}

/// Total loss and its named parts.
pub struct LossTerms {
    pub total: Var,
    pub parts: Vec<(&'static str, Var)>,
}

/// Builds the model's training loss on `g`:
/// S2L `weighted_l1 + w_v · velocity`, PoseGen `L1 + w_kl · KL`, L2L `L1`.
pub fn model_loss(model: &AnyModel, g: &mut Graph, batch: &Batch, cfg: &TrainConfig) -> Result<LossTerms> {
    match (model, batch) {
        (AnyModel::S2l(m), Batch::S2l(b)) => {
            let pred = m.forward(g, b)?;
            let pos = weighted_l1_graph(g, pred, &b.target, &landmark_weights(cfg.lambda_y))?;
            let vel = velocity_graph(g, pred, &b.target, b.batch)?;
            let wv = g.scale(vel, cfg.velocity_weight);
            let total = g.add(pos, wv);
            Ok(LossTerms {
                total,
                parts: vec![("position", pos), ("velocity", vel)],
            })
        }
        (AnyModel::PoseGen(m), Batch::PoseGen(b)) => {
            let out = m.forward(g, b)?;
            let rec = l1_graph(g, out.pred, &b.poses)?;
            let kl = kl_graph(g, out.mu, out.logvar);
            let wkl = g.scale(kl, cfg.kl_weight);
            let total = g.add(rec, wkl);
            Ok(LossTerms {
                total,
                parts: vec![("reconstruction", rec), ("kl", kl)],
            })
        }
        (AnyModel::L2l(m), Batch::L2l(b)) => {
            let pred = m.forward(g, b)?;
            let l1 = l1_graph(g, pred, &b.target)?;
            Ok(LossTerms {
                total: l1,
                parts: vec![("keypoints", l1)],
            })
        }
        _ => Err(invalid!("batch does not match model {}", model.kind())),
    }
}

/// One logged optimization step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    pub components: BTreeMap<String, f64>,
    pub lr: f64,
    pub grad_norm: f64,
}

/// Teacher-forced optimizer over a fixed set of clips.
pub struct Trainer {
    pub model: AnyModel,
    pub model_seed: u64,
    pub config: TrainConfig,
    pub adam: Adam,
    pub step: usize,
    pub clips: Vec<ClipData>,
    rng: ChaCha8Rng,
}

impl Trainer {
    /// Fresh run: standardizes audio inputs from `clips` and zeroes the
    /// optimizer.
    pub fn new(mut model: AnyModel, model_seed: u64, config: TrainConfig, clips: Vec<ClipData>) -> Result<Self> {
        config.validate()?;
        if clips.is_empty() {
            return Err(invalid!("no training clips"));
        }
        model.fit_audio_norm(&stacked_audio(&clips));
        let adam = Adam::new(model.store(), AdamConfig::default());
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Trainer {
            model,
            model_seed,
            config,
            adam,
            step: 0,
            clips,
            rng,
        })
    }

    /// Continues from a checkpoint; the data order restarts from a stream
    /// keyed by seed and step.
    pub fn resume(ckpt: Checkpoint, config: TrainConfig, clips: Vec<ClipData>) -> Result<Self> {
        config.validate()?;
        if clips.is_empty() {
            return Err(invalid!("no training clips"));
        }
        let adam = ckpt
            .optimizer
            .clone()
            .unwrap_or_else(|| Adam::new(ckpt.model.store(), AdamConfig::default()));
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(ckpt.step as u64);
        Ok(Trainer {
            model: ckpt.model,
            model_seed: ckpt.model_seed,
            config,
            adam,
            step: ckpt.step,
            clips,
            rng,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    /// Draws the next random batch.
    pub fn next_batch(&mut self) -> Result<Batch> {
        let crops = draw_crops(&self.clips, self.config.batch_size, self.config.crop_frames, &mut self.rng)?;
        let mut overrides = Vec::with_capacity(crops.len());
        for c in &crops {
            let aug = self.config.augment_prob > 0.0 && self.rng.gen::<f64>() < self.config.augment_prob;
            overrides.push(if aug {
                let seed = self.rng.gen();
                Some(self.clips[c.clip].augmented_audio(&self.config.augment, seed)?)
            } else {
                None
            });
        }
        Ok(match &self.model {
            AnyModel::S2l(m) => Batch::S2l(s2l_batch(&self.clips, &crops, &overrides, m.config.mouth_conditioning)),
            AnyModel::PoseGen(m) => {
                Batch::PoseGen(posegen_batch(&self.clips, &crops, &overrides, m.config.latent, &mut self.rng))
            }
            AnyModel::L2l(_) => Batch::L2l(l2l_batch(&self.clips, &crops, &overrides)),
        })
    }

    /// Loss and gradients of one batch without updating anything.
    pub fn evaluate(&self, batch: &Batch) -> Result<(f64, BTreeMap<String, f64>, Gradients, Vec<(crate::nn::ParamId, Mat)>)> {
        let mut g = Graph::new(true);
        let terms = model_loss(&self.model, &mut g, batch, &self.config)?;
        let loss = g.scalar(terms.total);
        let parts = terms.parts.iter().map(|(n, v)| (n.to_string(), g.scalar(*v))).collect();
        let grads = g.backward(terms.total);
        let buffers = g.take_buffer_updates();
        Ok((loss, parts, grads, buffers))
    }

    /// One optimization step on a fresh batch.
    pub fn step(&mut self) -> Result<StepRecord> {
        let batch = self.next_batch()?;
        self.step_on(&batch)
    }

    /// One optimization step on the given batch.
    pub fn step_on(&mut self, batch: &Batch) -> Result<StepRecord> {
        let (loss, components, mut grads, buffers) = self.evaluate(batch)?;
        if !loss.is_finite() || components.values().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                step: self.step,
                detail: format!("loss {loss}, components {components:?}"),
            });
        }
        let grad_norm = clip_global_norm(&mut grads, self.config.clip_norm);
        if !grad_norm.is_finite() {
            return Err(Error::Diverged {
                step: self.step,
                detail: format!("gradient norm {grad_norm}"),
            });
        }
        let lr = lr_schedule(self.step, &self.config);
        self.adam.update(self.model.store_mut(), &grads, lr);
        self.model.store_mut().apply_buffer_updates(buffers);
        let rec = StepRecord {
            step: self.step,
            loss,
            components,
            lr,
            grad_norm,
        };
        self.step += 1;
        Ok(rec)
    }

    pub fn checkpoint(&self, profile: Option<&str>) -> Checkpoint {
        Checkpoint {
            model: self.model.clone(),
            model_seed: self.model_seed,
            step: self.step,
            profile: profile.map(str::to_string),
            optimizer: Some(self.adam.clone()),
            train_config: Some(self.config.clone()),
        }
    }
}

/// Result of [`train_model`].
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
    pub steps: usize,
    pub first_loss: Option<f64>,
    pub final_loss: Option<f64>,
}

pub fn checkpoint_path(out_dir: &Path, kind: ModelKind) -> PathBuf {
    out_dir.join(format!("{}.ckpt", kind.name()))
}

pub fn metrics_path(out_dir: &Path, kind: ModelKind) -> PathBuf {
    out_dir.join(format!("{}.metrics.jsonl", kind.name()))
}

/// Trains one model on `clips` for `config.total_steps` steps, logging to
/// `out_dir/<model>.metrics.jsonl` and checkpointing to `out_dir/<model>.ckpt`.
pub fn train_model(
    kind: ModelKind,
    clips: Vec<ClipData>,
    models: &ModelConfig,
    config: &TrainConfig,
    out_dir: &Path,
    profile: Option<&str>,
) -> Result<TrainOutcome> {
    let model_seed = config.seed;
    let model = AnyModel::new(kind, models, model_seed)?;
    let mut trainer = Trainer::new(model, model_seed, config.clone(), clips)?;
    run_trainer(&mut trainer, config.total_steps, out_dir, profile)
}

/// Runs `trainer` until it reaches `until` steps.
pub fn run_trainer(trainer: &mut Trainer, until: usize, out_dir: &Path, profile: Option<&str>) -> Result<TrainOutcome> {
    crate::io::create_dir(out_dir)?;
    let kind = trainer.kind();
    let ckpt_path = checkpoint_path(out_dir, kind);
    let metrics = metrics_path(out_dir, kind);
    let mut log = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&metrics)
        .map_err(|e| Error::io(&metrics, e))?;
    let mut first_loss = None;
    let mut final_loss = None;
    while trainer.step < until {
        let rec = match trainer.step() {
            Ok(r) => r,
            Err(e @ Error::Diverged { .. }) => {
                let diag = out_dir.join(format!("{}.diverged.ckpt", kind.name()));
                trainer.checkpoint(profile).save(&diag)?;
                log::error!("{kind} diverged; diagnostic checkpoint at {}", diag.display());
                return Err(e);
            }
            Err(e) => return Err(e),
        };
        first_loss.get_or_insert(rec.loss);
        final_loss = Some(rec.loss);
        let every = trainer.config.log_every.max(1);
        if rec.step % every == 0 || trainer.step == until {
            let mut line = serde_json::to_vec(&rec).expect("record serializes");
            line.push(b'\n');
            log.write_all(&line).map_err(|e| Error::io(&metrics, e))?;
            log::info!("{kind} step {} loss {:.5} lr {:.2e}", rec.step, rec.loss, rec.lr);
        }
        let every = trainer.config.checkpoint_every;
        if every > 0 && trainer.step.is_multiple_of(every) && trainer.step < until {
            trainer.checkpoint(profile).save(&ckpt_path)?;
        }
    }
    trainer.checkpoint(profile).save(&ckpt_path)?;
    Ok(TrainOutcome {
        checkpoint: ckpt_path,
        metrics,
        steps: trainer.step,
        first_loss,
        final_loss,
    })
}

/// Reads a metrics log.
pub fn read_metrics(path: &Path) -> Result<Vec<StepRecord>> {
    crate::io::read_jsonl(path)
}

#[cfg(test)]
mod tests;
