//! Per-clip training tensors and random-crop batching.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::audiofeat::{align_frames, augment, compute_mfcc, AudioFeatures, AugmentSpec, Waveform};
use crate::error::{contract, invalid, Result};
use crate::geometry::layout::{FACE_DIM, MOUTH};
use crate::models::{
    landmark_row, pose_features, AUDIO_DIM, L2lBatch, PoseGenBatch, S2lBatch, LANDMARK_DIM, MOUTH_DIM, POSE_DIM,
};
use crate::nn::Mat;
use crate::synthdata::{ClipRecord, Corpus, EmotionVector, ManifestEntry, KEYPOINT_DIM, NUM_EMOTIONS};

/// Everything the three models train on for one clip, as row matrices.
#[derive(Clone, Debug)]
pub struct ClipData {
    pub id: String,
    pub waveform: Waveform,
    /// `T × 40`.
    pub audio: Mat,
    /// `T × 308` frontal-normalized landmarks.
    pub landmarks: Mat,
    /// `1 × 308`.
    pub source: Mat,
    pub emotion: EmotionVector,
    /// `T × 6` normalized poses.
    pub poses: Mat,
    /// `T × 204` posed face landmarks.
    pub posed: Mat,
    /// `T × 60` oracle keypoints.
    pub latents: Mat,
    /// `1 × 60`.
    pub source_kp: Mat,
}

fn rows_to_mat(rows: &[Vec<f64>], dim: usize) -> Result<Mat> {
    let mut m = Array2::zeros((rows.len(), dim));
    for (t, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(contract!("row of width {} where {dim} expected", r.len()));
        }
        m.row_mut(t).assign(&ndarray::ArrayView1::from(&r[..]));
    }
    Ok(m)
}

fn features_mat(f: &AudioFeatures) -> Mat {
    Array2::from_shape_vec((f.frames(), AUDIO_DIM), f.data().to_vec()).expect("feature shape")
}

impl ClipData {
    pub fn from_record(clip: &ClipRecord) -> Result<Self> {
        let t = clip.len();
        if t < 2 {
            return Err(invalid!("clip {} has {t} frames; training needs at least 2", clip.id));
        }
        let audio = align_frames(&compute_mfcc(&clip.waveform)?, t)?;
        let landmarks: Vec<Vec<f64>> = clip.frames.iter().map(landmark_row).collect();
        let posed: Vec<Vec<f64>> = clip.posed_frames()?.iter().map(|f| f.flat_face()).collect();
        let poses: Vec<Vec<f64>> = clip.poses.iter().map(|p| pose_features(p).to_vec()).collect();
        let latents: Vec<Vec<f64>> = clip.latents.iter().map(|k| k.flat()).collect();
        Ok(ClipData {
            id: clip.id.clone(),
            waveform: clip.waveform.clone(),
            audio: features_mat(&audio),
            landmarks: rows_to_mat(&landmarks, LANDMARK_DIM)?,
            source: rows_to_mat(&[landmark_row(&clip.source)], LANDMARK_DIM)?,
            emotion: clip.emotion,
            poses: rows_to_mat(&poses, POSE_DIM)?,
            posed: rows_to_mat(&posed, FACE_DIM)?,
            latents: rows_to_mat(&latents, KEYPOINT_DIM)?,
            source_kp: rows_to_mat(&[clip.source_kp.flat()], KEYPOINT_DIM)?,
        })
    }

    /// The clip's audio features as [`AudioFeatures`].
    pub fn features(&self) -> AudioFeatures {
        AudioFeatures::new(self.len(), self.audio.iter().copied().collect()).expect("feature shape")
    }

    pub fn len(&self) -> usize {
        self.audio.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Audio features of an augmented copy of the waveform.
    pub fn augmented_audio(&self, spec: &AugmentSpec, seed: u64) -> Result<Mat> {
        let w = augment(&self.waveform, spec, seed)?;
        Ok(features_mat(&align_frames(&compute_mfcc(&w)?, self.len())?))
    }
}

/// Loads and converts the given manifest entries.
pub fn load_clips<'a>(corpus: &Corpus, entries: impl IntoIterator<Item = &'a ManifestEntry>) -> Result<Vec<ClipData>> {
    entries
        .into_iter()
        .map(|e| ClipData::from_record(&corpus.load_clip(e)?))
        .collect()
}

/// All audio frames of the given clips stacked, for input standardization.
pub fn stacked_audio(clips: &[ClipData]) -> Mat {
    let rows: usize = clips.iter().map(|c| c.len()).sum();
    let mut m = Array2::zeros((rows, AUDIO_DIM));
    let mut r = 0;
    for c in clips {
        m.slice_mut(ndarray::s![r..r + c.len(), ..]).assign(&c.audio);
        r += c.len();
    }
    m
}

/// A crop `[start, start + len)` of clip `clip`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Crop {
    pub clip: usize,
    pub start: usize,
    pub len: usize,
}

/// Draws `batch` clips uniformly with replacement and a random crop of each.
/// The crop length is `crop_frames`, shortened to the shortest drawn clip.
pub fn draw_crops(clips: &[ClipData], batch: usize, crop_frames: usize, rng: &mut impl Rng) -> Result<Vec<Crop>> {
    if clips.is_empty() || batch == 0 || crop_frames < 2 {
        return Err(invalid!("batching needs clips, a positive batch size and crops of at least 2 frames"));
    }
    let picks: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..clips.len())).collect();
    let len = picks.iter().map(|&i| clips[i].len()).min().expect("nonempty").min(crop_frames);
    Ok(picks
        .into_iter()
        .map(|clip| {
            let start = rng.gen_range(0..=clips[clip].len() - len);
            Crop { clip, start, len }
        })
        .collect())
}

/// Time-major gather: row `t * batch + b` is row `start_b + t + offset` of
/// `pick(clip_b)`, or `before(clip_b)` when that index is negative.
fn gather(
    clips: &[ClipData],
    crops: &[Crop],
    dim: usize,
    offset: isize,
    pick: impl Fn(&ClipData) -> &Mat,
    before: impl Fn(&ClipData) -> &Mat,
) -> Mat {
    let batch = crops.len();
    let len = crops[0].len;
    let mut m = Array2::zeros((len * batch, dim));
    for (b, c) in crops.iter().enumerate() {
        let data = &clips[c.clip];
        for t in 0..len {
            let idx = c.start as isize + t as isize + offset;
            let src = if idx < 0 {
                before(data).row(0)
            } else {
                pick(data).row(idx as usize)
            };
            m.row_mut(t * batch + b).assign(&src);
        }
    }
    m
}

fn per_clip(clips: &[ClipData], crops: &[Crop], dim: usize, pick: impl Fn(&ClipData) -> &Mat) -> Mat {
    let mut m = Array2::zeros((crops.len(), dim));
    for (b, c) in crops.iter().enumerate() {
        m.row_mut(b).assign(&pick(&clips[c.clip]).row(0));
    }
    m
}

fn emotions(clips: &[ClipData], crops: &[Crop]) -> Mat {
    Array2::from_shape_fn((crops.len(), NUM_EMOTIONS), |(b, k)| clips[crops[b].clip].emotion.weights()[k])
}

/// Audio rows for the crops; `audio_override[b]`, when set, replaces clip
/// `b`'s full feature matrix (augmented audio).
fn audio_rows(clips: &[ClipData], crops: &[Crop], audio_override: &[Option<Mat>]) -> Mat {
    let batch = crops.len();
    let len = crops[0].len;
    let mut m = Array2::zeros((len * batch, AUDIO_DIM));
    for (b, c) in crops.iter().enumerate() {
        let a = audio_override.get(b).and_then(|o| o.as_ref()).unwrap_or(&clips[c.clip].audio);
        for t in 0..len {
            m.row_mut(t * batch + b).assign(&a.row(c.start + t));
        }
    }
    m
}

pub fn s2l_batch(clips: &[ClipData], crops: &[Crop], audio_override: &[Option<Mat>], mouth: bool) -> S2lBatch {
    let target = gather(clips, crops, LANDMARK_DIM, 0, |c| &c.landmarks, |c| &c.source);
    let mouth = mouth.then(|| {
        let cols = MOUTH.start * 3..MOUTH.end * 3;
        let m = target.slice(ndarray::s![.., cols]).to_owned();
        debug_assert_eq!(m.ncols(), MOUTH_DIM);
        m
    });
    S2lBatch {
        steps: crops[0].len,
        batch: crops.len(),
        audio: audio_rows(clips, crops, audio_override),
        prev: gather(clips, crops, LANDMARK_DIM, -1, |c| &c.landmarks, |c| &c.source),
        source: per_clip(clips, crops, LANDMARK_DIM, |c| &c.source),
        emotion: emotions(clips, crops),
        mouth,
        target,
    }
}

pub fn posegen_batch(
    clips: &[ClipData],
    crops: &[Crop],
    audio_override: &[Option<Mat>],
    latent: usize,
    rng: &mut impl Rng,
) -> PoseGenBatch {
    let eps = Array2::from_shape_simple_fn((crops.len(), latent), || rng.sample(StandardNormal));
    PoseGenBatch {
        steps: crops[0].len,
        batch: crops.len(),
        audio: audio_rows(clips, crops, audio_override),
        poses: gather(clips, crops, POSE_DIM, 0, |c| &c.poses, |c| &c.poses),
        eps,
    }
}

pub fn l2l_batch(clips: &[ClipData], crops: &[Crop], audio_override: &[Option<Mat>]) -> L2lBatch {
    L2lBatch {
        steps: crops[0].len,
        batch: crops.len(),
        audio: audio_rows(clips, crops, audio_override),
        posed: gather(clips, crops, FACE_DIM, 0, |c| &c.posed, |c| &c.posed),
        source_kp: per_clip(clips, crops, KEYPOINT_DIM, |c| &c.source_kp),
        prev: gather(clips, crops, KEYPOINT_DIM, -1, |c| &c.latents, |c| &c.source_kp),
        emotion: emotions(clips, crops),
        target: gather(clips, crops, KEYPOINT_DIM, 0, |c| &c.latents, |c| &c.latents),
    }
}
