//! Speech to landmarks: `face_t = LSTM(face_{t-1}, a_t)` in frontal-normalized
//! space, predicted as an offset from the clip's source face.

use serde::{Deserialize, Serialize};

use super::layers::{AudioEncoder, AudioEncoderConfig, Film, Init, Linear, Lstm, LstmState, Mlp};
use super::{audio_matrix, emotion_matrix, landmark_row, model_rng, renormalize_row, AUDIO_DIM, FILM_HIDDEN, LANDMARK_DIM, MOUTH_DIM};
use crate::audiofeat::AudioFeatures;
use crate::error::{contract, invalid, Result};
use crate::geometry::layout::FACE_DIM;
use crate::geometry::{LandmarkFrame, Space};
use crate::nn::{Graph, Mat, ParamStore, Var};
use crate::synthdata::{EmotionVector, NUM_EMOTIONS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct S2lConfig {
    pub encoder: AudioEncoderConfig,
    pub hidden: usize,
    pub lstm_layers: usize,
    pub width: usize,
    pub landmark_layers: usize,
    pub eye_layers: usize,
    pub init_layers: usize,
    pub film_hidden: usize,
    /// Feeds the current frame's ground-truth mouth landmarks as an extra input.
    pub mouth_conditioning: bool,
}

impl S2lConfig {
    pub fn new(channels: usize, hidden: usize) -> Self {
        S2lConfig {
            encoder: AudioEncoderConfig::with_channels(channels),
            hidden,
            lstm_layers: 2,
            width: hidden,
            landmark_layers: 8,
            eye_layers: 4,
            init_layers: 4,
            film_hidden: FILM_HIDDEN,
            mouth_conditioning: false,
        }
    }
}

/// Teacher-forced training batch, time-major with `batch` clips per step.
#[derive(Clone, Debug)]
pub struct S2lBatch {
    pub steps: usize,
    pub batch: usize,
    /// `(steps · batch) × 40` audio features.
    pub audio: Mat,
    /// `(steps · batch) × 308`: the ground-truth frame before each step.
    pub prev: Mat,
    /// `batch × 308` source faces.
    pub source: Mat,
    /// `batch × 8`.
    pub emotion: Mat,
    /// `(steps · batch) × 60` current-frame mouth landmarks, when conditioning.
    pub mouth: Option<Mat>,
    /// `(steps · batch) × 308` targets.
    pub target: Mat,
}

#[derive(Clone, Debug)]
pub struct S2l {
    pub config: S2lConfig,
    pub store: ParamStore,
    pub encoder: AudioEncoder,
    film_face: Film,
    face_mlp: Mlp,
    eye_mlp: Mlp,
    film_init: Film,
    init_mlp: Mlp,
    lstm: Lstm,
    head: Linear,
}

impl S2l {
    pub fn new(config: &S2lConfig, seed: u64) -> Result<Self> {
        config.encoder.validate()?;
        let c = config;
        let mut store = ParamStore::new();
        let rng = &mut model_rng(seed);
        let s = &mut store;
        let encoder = AudioEncoder::new(s, rng, "s2l.audio", AUDIO_DIM, &c.encoder, Some((NUM_EMOTIONS, c.film_hidden)));
        let ch = c.encoder.channels;
        let eye_dim = LANDMARK_DIM - FACE_DIM;
        let film_face = Film::new(s, rng, "s2l.film_face", NUM_EMOTIONS, c.film_hidden, FACE_DIM);
        let face_mlp = Mlp::new(s, rng, "s2l.face", FACE_DIM, c.width, c.width, c.landmark_layers, true, Init::He);
        let eye_mlp = Mlp::new(s, rng, "s2l.eyes", eye_dim, c.width, c.width, c.eye_layers, true, Init::He);
        let film_init = Film::new(s, rng, "s2l.film_init", NUM_EMOTIONS, c.film_hidden, FACE_DIM);
        let state_dim = 2 * c.lstm_layers * c.hidden;
        let init_mlp = Mlp::new(s, rng, "s2l.init", LANDMARK_DIM + ch, c.width, state_dim, c.init_layers, false, Init::Small);
        let lstm_in = ch + 2 * c.width + if c.mouth_conditioning { MOUTH_DIM } else { 0 };
        let lstm = Lstm::new(s, rng, "s2l.lstm", lstm_in, c.hidden, c.lstm_layers);
        let head = Linear::new(s, rng, "s2l.head", c.hidden, LANDMARK_DIM, Init::Small);
        Ok(S2l {
            config: config.clone(),
            store,
            encoder,
            film_face,
            face_mlp,
            eye_mlp,
            film_init,
            init_mlp,
            lstm,
            head,
        })
    }

    /// Packed `[h1 | c1 | h2 | c2]` initial state from the first face and
    /// first audio embedding, `batch` rows.
    fn init_state_var(&self, g: &mut Graph, face0: Var, a0: Var, emo: Var) -> Var {
        let st = &self.store;
        let face = g.slice_cols(face0, 0, FACE_DIM);
        let eyes = g.slice_cols(face0, FACE_DIM, LANDMARK_DIM);
        let face = self.film_init.apply(g, st, face, emo, 1);
        let x = g.concat_cols(&[face, eyes, a0]);
        self.init_mlp.forward(g, st, x)
    }

    /// LSTM inputs for `steps` time steps from embeddings and previous frames.
    fn step_inputs(&self, g: &mut Graph, emb: Var, prev: Var, emo: Var, mouth: Option<Var>, steps: usize) -> Var {
        let st = &self.store;
        let face = g.slice_cols(prev, 0, FACE_DIM);
        let eyes = g.slice_cols(prev, FACE_DIM, LANDMARK_DIM);
        let face = self.film_face.apply(g, st, face, emo, steps);
        let f = self.face_mlp.forward(g, st, face);
        let e = self.eye_mlp.forward(g, st, eyes);
        let mut parts = vec![emb, f, e];
        parts.extend(mouth);
        g.concat_cols(&parts)
    }

    fn check_batch(&self, b: &S2lBatch) -> Result<()> {
        let rows = b.steps * b.batch;
        let ok = b.audio.dim() == (rows, AUDIO_DIM)
            && b.prev.dim() == (rows, LANDMARK_DIM)
            && b.target.dim() == (rows, LANDMARK_DIM)
            && b.source.dim() == (b.batch, LANDMARK_DIM)
            && b.emotion.dim() == (b.batch, NUM_EMOTIONS)
            && match (&b.mouth, self.config.mouth_conditioning) {
                (Some(m), true) => m.dim() == (rows, MOUTH_DIM),
                (None, false) => true,
                _ => false,
            };
        if rows == 0 || !ok {
            return Err(contract!("S2L batch shapes do not match {} steps × {} clips", b.steps, b.batch));
        }
        Ok(())
    }

    /// Teacher-forced predictions, `(steps · batch) × 308`.
    pub fn forward(&self, g: &mut Graph, b: &S2lBatch) -> Result<Var> {
        self.check_batch(b)?;
        let st = &self.store;
        let (steps, batch) = (b.steps, b.batch);
        let emo = g.input(b.emotion.clone());
        let feats = g.input(b.audio.clone());
        let emb = self.encoder.forward(g, st, feats, steps, batch, Some(emo));
        let prev = g.input(b.prev.clone());
        let face0 = g.slice_rows(prev, 0, batch);
        let a0 = g.slice_rows(emb, 0, batch);
        let packed = self.init_state_var(g, face0, a0, emo);
        let state = self.lstm.state_from(g, packed);
        let mouth = b.mouth.as_ref().map(|m| g.input(m.clone()));
        let x = self.step_inputs(g, emb, prev, emo, mouth, steps);
        let (h, _) = self.lstm.run(g, st, x, steps, batch, state);
        let delta = self.head.forward(g, st, h);
        let src = g.input(b.source.clone());
        let src = g.tile_rows(src, steps);
        Ok(g.add(delta, src))
    }

    /// Learned initial state for one clip, packed `[h1 | c1 | h2 | c2]`.
    pub fn init_hidden(&self, face_0: &LandmarkFrame, a_0: &[f64], emotion: &EmotionVector) -> Result<Vec<f64>> {
        if face_0.space() != Space::FrontalNormalized {
            return Err(contract!("S2L initial face must be frontal_normalized, got {:?}", face_0.space()));
        }
        if a_0.len() != self.config.encoder.channels {
            return Err(contract!("audio embedding has {} values, expected {}", a_0.len(), self.config.encoder.channels));
        }
        let mut g = Graph::inference();
        let face = g.input(row(&landmark_row(face_0)));
        let a = g.input(row(a_0));
        let emo = g.input(emotion_matrix(std::slice::from_ref(emotion)));
        let v = self.init_state_var(&mut g, face, a, emo);
        Ok(g.value(v).iter().copied().collect())
    }

    /// Per-frame audio embeddings of one clip in inference mode.
    pub fn embed_audio(&self, audio: &AudioFeatures, emotion: &EmotionVector) -> Result<Mat> {
        let mut g = Graph::inference();
        let feats = g.input(audio_matrix(audio)?);
        let emo = g.input(emotion_matrix(std::slice::from_ref(emotion)));
        let emb = self.encoder.forward(&mut g, &self.store, feats, audio.frames(), 1, Some(emo));
        Ok(g.value(emb).clone())
    }

    /// Autoregressive generation of one frame per audio frame. Each
    /// prediction is renormalized and fed back as the next step's input;
    /// with `teacher` the ground-truth previous frame is fed instead.
    /// `mouth` supplies per-frame mouth landmarks when the model is
    /// mouth-conditioned.
    pub fn rollout(
        &self,
        source: &LandmarkFrame,
        audio: &AudioFeatures,
        emotion: &EmotionVector,
        teacher: Option<&[LandmarkFrame]>,
        mouth: Option<&[Vec<f64>]>,
    ) -> Result<Vec<LandmarkFrame>> {
        let steps = audio.frames();
        if steps == 0 {
            return Err(invalid!("S2L rollout needs at least one audio frame"));
        }
        if source.space() != Space::FrontalNormalized {
            return Err(contract!("S2L source face must be frontal_normalized, got {:?}", source.space()));
        }
        if let Some(t) = teacher {
            if t.len() != steps {
                return Err(contract!("{} teacher frames for {steps} audio frames", t.len()));
            }
        }
        let mouth = match (self.config.mouth_conditioning, mouth) {
            (false, _) => None,
            (true, Some(m)) if m.len() == steps && m.iter().all(|r| r.len() == MOUTH_DIM) => Some(m),
            (true, _) => return Err(invalid!("mouth-conditioned S2L needs {steps} mouth rows of {MOUTH_DIM}")),
        };
        let st = &self.store;
        let mut g = Graph::inference();
        let emo = g.input(emotion_matrix(std::slice::from_ref(emotion)));
        let feats = g.input(audio_matrix(audio)?);
        let emb = self.encoder.forward(&mut g, st, feats, steps, 1, Some(emo));
        let src_row = landmark_row(source);
        let src = g.input(row(&src_row));
        let a0 = g.slice_rows(emb, 0, 1);
        let packed = self.init_state_var(&mut g, src, a0, emo);
        let mut state: LstmState = self.lstm.state_from(&mut g, packed);
        let mut prev = src;
        let mut out = Vec::with_capacity(steps);
        for t in 0..steps {
            let e = g.slice_rows(emb, t, t + 1);
            let m = mouth.map(|m| g.input(row(&m[t])));
            let x = self.step_inputs(&mut g, e, prev, emo, m, 1);
            let (h, s) = self.lstm.run(&mut g, st, x, 1, 1, state);
            state = s;
            let delta = self.head.forward(&mut g, st, h);
            let pred = g.add(delta, src);
            let frame = renormalize_row(&g.value(pred).iter().copied().collect::<Vec<_>>())?;
            let next = match teacher {
                Some(gt) => landmark_row(&gt[t]),
                None => landmark_row(&frame),
            };
            out.push(frame);
            prev = g.input(row(&next));
        }
        Ok(out)
    }
}

fn row(v: &[f64]) -> Mat {
    Mat::from_shape_vec((1, v.len()), v.to_vec()).expect("row shape")
}
