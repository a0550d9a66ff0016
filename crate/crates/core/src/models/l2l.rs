//! Landmarks to latents: `kp_t = LSTM(posed face_t, a_t, kp_s, kp_{t-1})`.
//! Outputs are `tanh(atanh(kp_s) + Δ)`, an offset from the source keypoints
//! that stays inside the open unit box.

use serde::{Deserialize, Serialize};

use super::layers::{AudioEncoder, AudioEncoderConfig, Film, Init, Linear, Lstm, LstmState, Mlp};
use super::{audio_matrix, emotion_matrix, model_rng, AUDIO_DIM, FILM_HIDDEN};
use crate::audiofeat::AudioFeatures;
use crate::error::{contract, invalid, Result};
use crate::geometry::layout::FACE_DIM;
use crate::geometry::{LandmarkFrame, Space};
use crate::nn::{Graph, Mat, ParamStore, Var};
use crate::synthdata::{EmotionVector, LatentKeypoints, KEYPOINT_DIM, NUM_EMOTIONS};

const ATANH_LIMIT: f64 = 1.0 - 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct L2lConfig {
    pub encoder: AudioEncoderConfig,
    pub hidden: usize,
    pub lstm_layers: usize,
    pub width: usize,
    pub landmark_layers: usize,
    pub source_layers: usize,
    pub prev_layers: usize,
    pub film_hidden: usize,
}

impl L2lConfig {
    pub fn new(channels: usize, hidden: usize) -> Self {
        L2lConfig {
            encoder: AudioEncoderConfig::with_channels(channels),
            hidden,
            lstm_layers: 2,
            width: hidden,
            landmark_layers: 8,
            source_layers: 4,
            prev_layers: 8,
            film_hidden: FILM_HIDDEN,
        }
    }
}

#[derive(Clone, Debug)]
pub struct L2lBatch {
    pub steps: usize,
    pub batch: usize,
    /// `(steps · batch) × 40`.
    pub audio: Mat,
    /// `(steps · batch) × 204` posed face landmarks.
    pub posed: Mat,
    /// `batch × 60` source keypoints.
    pub source_kp: Mat,
    /// `(steps · batch) × 60` ground-truth keypoints of the previous step
    /// (the source keypoints before the first frame).
    pub prev: Mat,
    /// `batch × 8`.
    pub emotion: Mat,
    /// `(steps · batch) × 60`.
    pub target: Mat,
}

#[derive(Clone, Debug)]
pub struct L2l {
    pub config: L2lConfig,
    pub store: ParamStore,
    pub encoder: AudioEncoder,
    film_lm: Film,
    lm_mlp: Mlp,
    film_src: Film,
    src_mlp: Mlp,
    prev_mlp: Mlp,
    lstm: Lstm,
    head: Linear,
}

fn atanh_clamped(v: f64) -> f64 {
    v.clamp(-ATANH_LIMIT, ATANH_LIMIT).atanh()
}

impl L2l {
    pub fn new(config: &L2lConfig, seed: u64) -> Result<Self> {
        config.encoder.validate()?;
        let c = config;
        let mut store = ParamStore::new();
        let rng = &mut model_rng(seed);
        let s = &mut store;
        let encoder = AudioEncoder::new(s, rng, "l2l.audio", AUDIO_DIM, &c.encoder, Some((NUM_EMOTIONS, c.film_hidden)));
        let ch = c.encoder.channels;
        let film_lm = Film::new(s, rng, "l2l.film_landmarks", NUM_EMOTIONS, c.film_hidden, FACE_DIM);
        let lm_mlp = Mlp::new(s, rng, "l2l.landmarks", FACE_DIM, c.width, c.width, c.landmark_layers, true, Init::He);
        let film_src = Film::new(s, rng, "l2l.film_source", NUM_EMOTIONS, c.film_hidden, KEYPOINT_DIM);
        let src_mlp = Mlp::new(s, rng, "l2l.source", KEYPOINT_DIM, c.width, c.width, c.source_layers, true, Init::He);
        let prev_mlp = Mlp::new(s, rng, "l2l.prev", KEYPOINT_DIM, c.width, c.width, c.prev_layers, true, Init::He);
        let lstm = Lstm::new(s, rng, "l2l.lstm", ch + 3 * c.width, c.hidden, c.lstm_layers);
        let head = Linear::new(s, rng, "l2l.head", c.hidden, KEYPOINT_DIM, Init::Small);
        Ok(L2l {
            config: config.clone(),
            store,
            encoder,
            film_lm,
            lm_mlp,
            film_src,
            src_mlp,
            prev_mlp,
            lstm,
            head,
        })
    }

    /// Per-step features that do not depend on the model's own output:
    /// audio embeddings, posed landmark codes and the source code, concatenated.
    fn open_loop_inputs(
        &self,
        g: &mut Graph,
        audio: &Mat,
        posed: &Mat,
        source_kp: Var,
        emo: Var,
        steps: usize,
        batch: usize,
    ) -> Var {
        let st = &self.store;
        let feats = g.input(audio.clone());
        let emb = self.encoder.forward(g, st, feats, steps, batch, Some(emo));
        let lm = g.input(posed.clone());
        let lm = self.film_lm.apply(g, st, lm, emo, steps);
        let lm = self.lm_mlp.forward(g, st, lm);
        let src = self.film_src.apply(g, st, source_kp, emo, 1);
        let src = self.src_mlp.forward(g, st, src);
        let src = g.tile_rows(src, steps);
        g.concat_cols(&[emb, lm, src])
    }

    fn check_batch(&self, b: &L2lBatch) -> Result<()> {
        let rows = b.steps * b.batch;
        if rows == 0
            || b.audio.dim() != (rows, AUDIO_DIM)
            || b.posed.dim() != (rows, FACE_DIM)
            || b.source_kp.dim() != (b.batch, KEYPOINT_DIM)
            || b.prev.dim() != (rows, KEYPOINT_DIM)
            || b.emotion.dim() != (b.batch, NUM_EMOTIONS)
            || b.target.dim() != (rows, KEYPOINT_DIM)
        {
            return Err(contract!("L2L batch shapes do not match {} steps × {} clips", b.steps, b.batch));
        }
        Ok(())
    }

    /// Teacher-forced keypoints, `(steps · batch) × 60`.
    pub fn forward(&self, g: &mut Graph, b: &L2lBatch) -> Result<Var> {
        self.check_batch(b)?;
        let st = &self.store;
        let (steps, batch) = (b.steps, b.batch);
        let emo = g.input(b.emotion.clone());
        let kp_s = g.input(b.source_kp.clone());
        let open = self.open_loop_inputs(g, &b.audio, &b.posed, kp_s, emo, steps, batch);
        let prev = g.input(b.prev.clone());
        let pv = self.prev_mlp.forward(g, st, prev);
        let x = g.concat_cols(&[open, pv]);
        let state = self.lstm.zero_state(g, batch);
        let (h, _) = self.lstm.run(g, st, x, steps, batch, state);
        let delta = self.head.forward(g, st, h);
        let base = g.input(b.source_kp.mapv(atanh_clamped));
        let base = g.tile_rows(base, steps);
        let pre = g.add(delta, base);
        Ok(g.tanh(pre))
    }

    /// Autoregressive keypoints for one clip; `kp_{-1}` is the source keypoints.
    pub fn rollout(
        &self,
        posed: &[LandmarkFrame],
        audio: &AudioFeatures,
        source_kp: &LatentKeypoints,
        emotion: &EmotionVector,
    ) -> Result<Vec<LatentKeypoints>> {
        let steps = audio.frames();
        if steps == 0 {
            return Err(invalid!("L2L rollout needs at least one audio frame"));
        }
        if posed.len() != steps {
            return Err(contract!("{} posed frames for {steps} audio frames", posed.len()));
        }
        if let Some(f) = posed.iter().find(|f| f.space() != Space::Posed) {
            return Err(contract!("L2L expects posed landmarks, got {:?}", f.space()));
        }
        let st = &self.store;
        let mut g = Graph::inference();
        let lm = Mat::from_shape_fn((steps, FACE_DIM), |(t, k)| posed[t].face()[k / 3][k % 3]);
        let src_row = Mat::from_shape_vec((1, KEYPOINT_DIM), source_kp.flat()).expect("row");
        let emo = g.input(emotion_matrix(std::slice::from_ref(emotion)));
        let kp_s = g.input(src_row.clone());
        let open = self.open_loop_inputs(&mut g, &audio_matrix(audio)?, &lm, kp_s, emo, steps, 1);
        let base = g.input(src_row.mapv(atanh_clamped));
        let mut state: LstmState = self.lstm.zero_state(&mut g, 1);
        let mut prev = kp_s;
        let mut out = Vec::with_capacity(steps);
        for t in 0..steps {
            let o = g.slice_rows(open, t, t + 1);
            let pv = self.prev_mlp.forward(&mut g, st, prev);
            let x = g.concat_cols(&[o, pv]);
            let (h, s) = self.lstm.run(&mut g, st, x, 1, 1, state);
            state = s;
            let delta = self.head.forward(&mut g, st, h);
            let pre = g.add(delta, base);
            let kp = g.tanh(pre);
            let v: Vec<f64> = g.value(kp).iter().copied().collect();
            if v.iter().any(|x| !x.is_finite()) {
                return Err(crate::Error::Diverged {
                    step: t,
                    detail: "non-finite keypoint prediction".into(),
                });
            }
            out.push(LatentKeypoints::from_flat(&v)?);
            prev = g.input(Mat::from_shape_vec((1, KEYPOINT_DIM), v).expect("row"));
        }
        Ok(out)
    }
}
