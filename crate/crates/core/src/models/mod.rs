//! The three learned stages and their shared building blocks.
//!
//! * [`S2l`]: audio to frontal-normalized landmarks, autoregressive.
//! * [`PoseGen`]: conditional VAE from audio and a 64-dim latent to head poses.
//! * [`L2l`]: posed landmarks, audio and source keypoints to latent keypoints,
//!   autoregressive.
//!
//! Every model owns its parameters in a [`ParamStore`]. Parameter creation is
//! deterministic under the model seed. Training uses teacher forcing over
//! time-major batches; rollouts run in inference mode, so batch norm uses its
//! running statistics and each output frame depends on audio up to
//! [`MAX_LOOKAHEAD`] frames ahead and on no future landmark or keypoint input.

pub mod layers;
mod l2l;
mod posegen;
mod s2l;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::audiofeat::AudioFeatures;
use crate::error::{contract, invalid, Result};
use crate::geometry::layout::{EYE_DIM, FACE_DIM, MOUTH};
use crate::geometry::{normalize_scale, LandmarkFrame, Space};
use crate::nn::{Mat, ParamStore};
use crate::synthdata::{EmotionVector, NUM_EMOTIONS};

pub use l2l::{L2l, L2lBatch, L2lConfig};
pub use layers::{AudioEncoderConfig, MAX_LOOKAHEAD};
pub use posegen::{
    pose_features, pose_from_features, pose_matrix, PoseGen, PoseGenBatch, PoseGenConfig, PoseGenOutput, ANGLE_RANGE,
    LATENT_DIM, POSE_DIM, TRANSLATION_SCALE,
};
pub use s2l::{S2l, S2lBatch, S2lConfig};

/// Values per landmark frame: 68 × 3 face then 52 × 2 eye coordinates.
pub const LANDMARK_DIM: usize = FACE_DIM + EYE_DIM;
/// Mouth landmark coordinates used by optional mouth conditioning.
pub const MOUTH_DIM: usize = (MOUTH.end - MOUTH.start) * 3;
pub const AUDIO_DIM: usize = crate::audiofeat::N_MFCC;
pub const FILM_HIDDEN: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    S2l,
    PoseGen,
    L2l,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::S2l, ModelKind::PoseGen, ModelKind::L2l];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::S2l => "s2l",
            ModelKind::PoseGen => "posegen",
            ModelKind::L2l => "l2l",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s2l" => Ok(ModelKind::S2l),
            "posegen" => Ok(ModelKind::PoseGen),
            "l2l" => Ok(ModelKind::L2l),
            _ => Err(invalid!("unknown model '{s}' (expected s2l, posegen or l2l)")),
        }
    }
}

/// Architecture settings of all three models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub s2l: S2lConfig,
    pub posegen: PoseGenConfig,
    pub l2l: L2lConfig,
}

impl ModelConfig {
    /// 128 conv channels and 128 LSTM units everywhere.
    pub fn desk() -> Self {
        Self::with_widths(128, 128, 128)
    }

    /// 1024 conv channels and LSTM units, 256 for the pose generator.
    pub fn paper() -> Self {
        Self::with_widths(1024, 1024, 256)
    }

    /// Uniform width for every layer and a pose-generator LSTM width.
    pub fn with_widths(channels: usize, hidden: usize, pose_hidden: usize) -> Self {
        ModelConfig {
            s2l: S2lConfig::new(channels, hidden),
            posegen: PoseGenConfig::new(channels, pose_hidden),
            l2l: L2lConfig::new(channels, hidden),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.s2l.encoder.validate()?;
        self.posegen.encoder.validate()?;
        self.l2l.encoder.validate()
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl AudioEncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.symmetric_kernel.is_multiple_of(2) || self.causal_kernel == 0 {
            return Err(invalid!("bad audio encoder config {self:?}"));
        }
        if self.lookahead() > MAX_LOOKAHEAD {
            return Err(invalid!("audio encoder lookahead {} exceeds {MAX_LOOKAHEAD}", self.lookahead()));
        }
        Ok(())
    }
}

/// Any trained model, as stored in a checkpoint.
#[derive(Clone, Debug)]
pub enum AnyModel {
    S2l(S2l),
    PoseGen(PoseGen),
    L2l(L2l),
}

impl AnyModel {
    pub fn new(kind: ModelKind, config: &ModelConfig, seed: u64) -> Result<Self> {
        Ok(match kind {
            ModelKind::S2l => AnyModel::S2l(S2l::new(&config.s2l, seed)?),
            ModelKind::PoseGen => AnyModel::PoseGen(PoseGen::new(&config.posegen, seed)?),
            ModelKind::L2l => AnyModel::L2l(L2l::new(&config.l2l, seed)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            AnyModel::S2l(_) => ModelKind::S2l,
            AnyModel::PoseGen(_) => ModelKind::PoseGen,
            AnyModel::L2l(_) => ModelKind::L2l,
        }
    }

    pub fn store(&self) -> &ParamStore {
        match self {
            AnyModel::S2l(m) => &m.store,
            AnyModel::PoseGen(m) => &m.store,
            AnyModel::L2l(m) => &m.store,
        }
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        match self {
            AnyModel::S2l(m) => &mut m.store,
            AnyModel::PoseGen(m) => &mut m.store,
            AnyModel::L2l(m) => &mut m.store,
        }
    }

    /// The model's own architecture block as JSON.
    pub fn config_json(&self) -> serde_json::Value {
        let v = match self {
            AnyModel::S2l(m) => serde_json::to_value(&m.config),
            AnyModel::PoseGen(m) => serde_json::to_value(&m.config),
            AnyModel::L2l(m) => serde_json::to_value(&m.config),
        };
        v.expect("configs serialize")
    }

    /// Rebuilds an untrained model from a kind and a config block.
    pub fn from_config_json(kind: ModelKind, config: &serde_json::Value, seed: u64) -> Result<Self> {
        let bad = |e: serde_json::Error| invalid!("model config: {e}");
        Ok(match kind {
            ModelKind::S2l => AnyModel::S2l(S2l::new(&serde_json::from_value(config.clone()).map_err(bad)?, seed)?),
            ModelKind::PoseGen => {
                AnyModel::PoseGen(PoseGen::new(&serde_json::from_value(config.clone()).map_err(bad)?, seed)?)
            }
            ModelKind::L2l => AnyModel::L2l(L2l::new(&serde_json::from_value(config.clone()).map_err(bad)?, seed)?),
        })
    }

    /// Sets every audio encoder's input standardization from training features.
    pub fn fit_audio_norm(&mut self, features: &Mat) {
        match self {
            AnyModel::S2l(m) => m.encoder.norm.fit(&mut m.store, features),
            AnyModel::PoseGen(m) => m.encoder.norm.fit(&mut m.store, features),
            AnyModel::L2l(m) => m.encoder.norm.fit(&mut m.store, features),
        }
    }
}

/// Flattens a frame to `[face (204) | eyes (104)]`.
pub fn landmark_row(frame: &LandmarkFrame) -> Vec<f64> {
    let mut v = frame.flat_face();
    v.extend(frame.flat_eyes());
    v
}

/// Rebuilds a frontal-normalized frame from a predicted row: recentred on the
/// face centroid and rescaled to ear distance 2.
pub fn renormalize_row(row: &[f64]) -> Result<LandmarkFrame> {
    if row.len() != LANDMARK_DIM {
        return Err(contract!("landmark row has {} values, expected {LANDMARK_DIM}", row.len()));
    }
    if row.iter().any(|v| !v.is_finite()) {
        return Err(crate::Error::Diverged {
            step: 0,
            detail: "non-finite landmark prediction".into(),
        });
    }
    let face: Vec<[f64; 3]> = row[..FACE_DIM].chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    let c = crate::geometry::centroid(&face);
    let face: Vec<[f64; 3]> = face.iter().map(|p| [p[0] - c[0], p[1] - c[1], p[2] - c[2]]).collect();
    let eyes = row[FACE_DIM..].chunks_exact(2).map(|e| [e[0] - c[0], e[1] - c[1]]).collect();
    let frame = LandmarkFrame::new(face, eyes, Space::Frontal)?;
    Ok(normalize_scale(&frame)?.0)
}

/// Stacks per-clip rows into a time-major `(steps · batch) × dim` matrix;
/// `rows[b][t]` is clip `b` at step `t`.
pub fn time_major(rows: &[Vec<Vec<f64>>], dim: usize) -> Result<Mat> {
    let batch = rows.len();
    if batch == 0 {
        return Err(invalid!("empty batch"));
    }
    let steps = rows[0].len();
    if rows.iter().any(|r| r.len() != steps) {
        return Err(contract!("batch sequences differ in length"));
    }
    let mut m = Array2::zeros((steps * batch, dim));
    for (b, seq) in rows.iter().enumerate() {
        for (t, r) in seq.iter().enumerate() {
            if r.len() != dim {
                return Err(contract!("row of width {} where {dim} expected", r.len()));
            }
            m.row_mut(t * batch + b).assign(&ndarray::ArrayView1::from(&r[..]));
        }
    }
    Ok(m)
}

/// `steps × 40` feature matrix of one clip.
pub fn audio_matrix(audio: &AudioFeatures) -> Result<Mat> {
    if audio.frames() == 0 {
        return Err(invalid!("empty audio features"));
    }
    Array2::from_shape_vec((audio.frames(), AUDIO_DIM), audio.data().to_vec())
        .map_err(|e| contract!("audio feature matrix: {e}"))
}

/// One row per clip.
pub fn emotion_matrix(emotions: &[EmotionVector]) -> Mat {
    Array2::from_shape_fn((emotions.len(), NUM_EMOTIONS), |(b, k)| emotions[b].weights()[k])
}

pub(crate) fn model_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests;
