//! Pose generator: a conditional VAE. A bidirectional LSTM encodes audio and
//! pose into `(μ, log σ²)` over a 64-dim latent; an LSTM decoder maps audio
//! and a latent sample to per-frame `(yaw, pitch, roll, tx, ty, tz)`.
//!
//! Poses enter and leave the networks in a normalized form: angles divided
//! by [`ANGLE_RANGE`] and translations multiplied by [`TRANSLATION_SCALE`].
//! Decoded angles pass through `tanh`, so they never exceed ±45°.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::layers::{AudioEncoder, AudioEncoderConfig, Init, Linear, Lstm, LstmLayer};
use super::{audio_matrix, model_rng, AUDIO_DIM};
use crate::audiofeat::AudioFeatures;
use crate::error::{contract, invalid, Result};
use crate::geometry::HeadPose;
use crate::nn::{Graph, Mat, ParamStore, Var};

pub const LATENT_DIM: usize = 64;
pub const POSE_DIM: usize = 6;
pub const ANGLE_RANGE: f64 = 45.0;
pub const TRANSLATION_SCALE: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseGenConfig {
    pub encoder: AudioEncoderConfig,
    pub hidden: usize,
    pub lstm_layers: usize,
    pub latent: usize,
}

impl PoseGenConfig {
    pub fn new(channels: usize, hidden: usize) -> Self {
        PoseGenConfig {
            encoder: AudioEncoderConfig::with_channels(channels),
            hidden,
            lstm_layers: 2,
            latent: LATENT_DIM,
        }
    }
}

/// Normalized network representation of a pose.
pub fn pose_features(p: &HeadPose) -> [f64; POSE_DIM] {
    [
        p.yaw / ANGLE_RANGE,
        p.pitch / ANGLE_RANGE,
        p.roll / ANGLE_RANGE,
        p.tx * TRANSLATION_SCALE,
        p.ty * TRANSLATION_SCALE,
        p.tz * TRANSLATION_SCALE,
    ]
}

pub fn pose_from_features(v: &[f64], scale: f64) -> HeadPose {
    HeadPose {
        yaw: v[0] * ANGLE_RANGE,
        pitch: v[1] * ANGLE_RANGE,
        roll: v[2] * ANGLE_RANGE,
        tx: v[3] / TRANSLATION_SCALE,
        ty: v[4] / TRANSLATION_SCALE,
        tz: v[5] / TRANSLATION_SCALE,
        scale,
    }
}

#[derive(Clone, Debug)]
pub struct PoseGenBatch {
    pub steps: usize,
    pub batch: usize,
    /// `(steps · batch) × 40`.
    pub audio: Mat,
    /// `(steps · batch) × 6` normalized poses, also the reconstruction target.
    pub poses: Mat,
    /// `batch × 64` standard-normal noise for the reparameterized sample.
    pub eps: Mat,
}

pub struct PoseGenOutput {
    /// `(steps · batch) × 6` normalized poses.
    pub pred: Var,
    pub mu: Var,
    pub logvar: Var,
}

#[derive(Clone, Debug)]
pub struct PoseGen {
    pub config: PoseGenConfig,
    pub store: ParamStore,
    pub encoder: AudioEncoder,
    enc_fwd: Vec<LstmLayer>,
    enc_bwd: Vec<LstmLayer>,
    mu: Linear,
    logvar: Linear,
    dec_init: Linear,
    dec: Lstm,
    head: Linear,
}

impl PoseGen {
    pub fn new(config: &PoseGenConfig, seed: u64) -> Result<Self> {
        config.encoder.validate()?;
        if config.latent == 0 || config.lstm_layers == 0 {
            return Err(invalid!("pose generator needs a latent and at least one LSTM layer"));
        }
        let c = config;
        let mut store = ParamStore::new();
        let rng = &mut model_rng(seed);
        let s = &mut store;
        let encoder = AudioEncoder::new(s, rng, "posegen.audio", AUDIO_DIM, &c.encoder, None);
        let ch = c.encoder.channels;
        let h = c.hidden;
        let mut enc_fwd = Vec::new();
        let mut enc_bwd = Vec::new();
        for i in 0..c.lstm_layers {
            let inputs = if i == 0 { ch + POSE_DIM } else { 2 * h };
            enc_fwd.push(LstmLayer::new(s, rng, &format!("posegen.enc_fwd.{i}"), inputs, h));
            enc_bwd.push(LstmLayer::new(s, rng, &format!("posegen.enc_bwd.{i}"), inputs, h));
        }
        let mu = Linear::new(s, rng, "posegen.mu", 2 * h, c.latent, Init::Uniform);
        let logvar = Linear::new(s, rng, "posegen.logvar", 2 * h, c.latent, Init::Small);
        let dec_init = Linear::new(s, rng, "posegen.dec_init", c.latent, 2 * c.lstm_layers * h, Init::Uniform);
        let dec = Lstm::new(s, rng, "posegen.dec", ch + c.latent, h, c.lstm_layers);
        let head = Linear::new(s, rng, "posegen.head", h, POSE_DIM, Init::Small);
        Ok(PoseGen {
            config: config.clone(),
            store,
            encoder,
            enc_fwd,
            enc_bwd,
            mu,
            logvar,
            dec_init,
            dec,
            head,
        })
    }

    fn zero(&self, g: &mut Graph, batch: usize) -> (Var, Var) {
        let z = g.input(Mat::zeros((batch, self.config.hidden)));
        (z, z)
    }

    /// `(μ, log σ²)`, each `batch × latent`.
    pub fn encode_graph(&self, g: &mut Graph, emb: Var, poses: Var, steps: usize, batch: usize) -> (Var, Var) {
        let st = &self.store;
        let mut x = g.concat_cols(&[emb, poses]);
        let mut last = (x, x);
        for (f, b) in self.enc_fwd.iter().zip(&self.enc_bwd) {
            let s0 = self.zero(g, batch);
            let (yf, (hf, _)) = f.run(g, st, x, steps, batch, s0, false);
            let s0 = self.zero(g, batch);
            let (yb, (hb, _)) = b.run(g, st, x, steps, batch, s0, true);
            x = g.concat_cols(&[yf, yb]);
            last = (hf, hb);
        }
        let summary = g.concat_cols(&[last.0, last.1]);
        let mu = self.mu.forward(g, st, summary);
        let logvar = self.logvar.forward(g, st, summary);
        (mu, logvar)
    }

    /// Normalized poses `(steps · batch) × 6` from embeddings and `batch × latent` z.
    pub fn decode_graph(&self, g: &mut Graph, emb: Var, z: Var, steps: usize, batch: usize) -> Var {
        let st = &self.store;
        let packed = self.dec_init.forward(g, st, z);
        let packed = g.tanh(packed);
        let state = self.dec.state_from(g, packed);
        let zt = g.tile_rows(z, steps);
        let x = g.concat_cols(&[emb, zt]);
        let (h, _) = self.dec.run(g, st, x, steps, batch, state);
        let out = self.head.forward(g, st, h);
        let ang = g.slice_cols(out, 0, 3);
        let ang = g.tanh(ang);
        let tr = g.slice_cols(out, 3, POSE_DIM);
        g.concat_cols(&[ang, tr])
    }

    fn check_batch(&self, b: &PoseGenBatch) -> Result<()> {
        let rows = b.steps * b.batch;
        if rows == 0
            || b.audio.dim() != (rows, AUDIO_DIM)
            || b.poses.dim() != (rows, POSE_DIM)
            || b.eps.dim() != (b.batch, self.config.latent)
        {
            return Err(contract!("pose generator batch shapes do not match {} steps × {} clips", b.steps, b.batch));
        }
        Ok(())
    }

    /// Reconstruction through `z = μ + σ ⊙ ε`.
    pub fn forward(&self, g: &mut Graph, b: &PoseGenBatch) -> Result<PoseGenOutput> {
        self.check_batch(b)?;
        let st = &self.store;
        let feats = g.input(b.audio.clone());
        let emb = self.encoder.forward(g, st, feats, b.steps, b.batch, None);
        let poses = g.input(b.poses.clone());
        let (mu, logvar) = self.encode_graph(g, emb, poses, b.steps, b.batch);
        let half = g.scale(logvar, 0.5);
        let sigma = g.exp(half);
        let eps = g.input(b.eps.clone());
        let noise = g.mul(sigma, eps);
        let z = g.add(mu, noise);
        let pred = self.decode_graph(g, emb, z, b.steps, b.batch);
        Ok(PoseGenOutput { pred, mu, logvar })
    }

    fn embed(&self, g: &mut Graph, audio: &AudioFeatures) -> Result<Var> {
        let feats = g.input(audio_matrix(audio)?);
        Ok(self.encoder.forward(g, &self.store, feats, audio.frames(), 1, None))
    }

    /// `(μ, σ)` of one clip; `σ = exp(½ log σ²)` is always positive.
    pub fn encode(&self, audio: &AudioFeatures, poses: &[HeadPose]) -> Result<(Vec<f64>, Vec<f64>)> {
        if poses.len() != audio.frames() {
            return Err(contract!("{} poses for {} audio frames", poses.len(), audio.frames()));
        }
        let mut g = Graph::inference();
        let emb = self.embed(&mut g, audio)?;
        let p = g.input(pose_matrix(poses));
        let (mu, logvar) = self.encode_graph(&mut g, emb, p, poses.len(), 1);
        let mu = g.value(mu).iter().copied().collect();
        let sigma = g.value(logvar).iter().map(|l| (0.5 * l).exp()).collect();
        Ok((mu, sigma))
    }

    /// Decodes one pose per audio frame from `z`; every pose gets `scale`.
    pub fn decode(&self, audio: &AudioFeatures, z: &[f64], scale: f64) -> Result<Vec<HeadPose>> {
        if z.len() != self.config.latent {
            return Err(contract!("latent has {} values, expected {}", z.len(), self.config.latent));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(invalid!("latent must be finite"));
        }
        let steps = audio.frames();
        let mut g = Graph::inference();
        let emb = self.embed(&mut g, audio)?;
        let zv = g.input(Mat::from_shape_vec((1, z.len()), z.to_vec()).expect("row"));
        let out = self.decode_graph(&mut g, emb, zv, steps, 1);
        let m = g.value(out);
        Ok((0..steps)
            .map(|t| pose_from_features(&m.row(t).to_vec(), scale))
            .collect())
    }

    /// Draws `z ~ N(0, I)` and decodes it.
    pub fn sample(&self, audio: &AudioFeatures, rng: &mut impl Rng, scale: f64) -> Result<(Vec<f64>, Vec<HeadPose>)> {
        let z: Vec<f64> = (0..self.config.latent).map(|_| rng.sample(StandardNormal)).collect();
        let poses = self.decode(audio, &z, scale)?;
        Ok((z, poses))
    }

    /// Decodes the posterior mean of a clip.
    pub fn reconstruct(&self, audio: &AudioFeatures, poses: &[HeadPose]) -> Result<Vec<HeadPose>> {
        let (mu, _) = self.encode(audio, poses)?;
        let scale = poses.first().map_or(1.0, |p| p.scale);
        self.decode(audio, &mu, scale)
    }
}

/// `steps × 6` normalized pose matrix.
pub fn pose_matrix(poses: &[HeadPose]) -> Mat {
    Mat::from_shape_fn((poses.len(), POSE_DIM), |(t, k)| pose_features(&poses[t])[k])
}
