//! Landmark metrics and evaluation reports.
//!
//! Mouth metrics (M-P, M-V) compare the 20 mouth landmarks after both
//! sequences are put in the metric frame (mouth corners at `(±1, 0)`).
//! Face metrics (F-P, F-V) compare all 68 landmarks after recentering on the
//! face centroid and scaling to an ear distance of 2. Every metric is a mean
//! absolute error over the x and y coordinates; the `-V` variants compare
//! first differences between adjacent frames.

use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{contract, invalid, Error, Result};
use crate::geometry::layout::{FACE_POINTS, MOUTH};
use crate::geometry::{metric_normalize, normalize_scale, LandmarkFrame, Point2, Space};
use crate::io;
use crate::pipeline::{infer, InferenceRequest, Models, PoseSource};
use crate::synthdata::{ClipRecord, LatentKeypoints};

mod emotion;

pub use emotion::{corner_offset, emotion_direction, intensity_sweep, spearman, CornerVector};

/// Position and velocity errors of one landmark group.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub position: f64,
    pub velocity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipMetrics {
    pub id: String,
    pub frames: usize,
    pub m_p: f64,
    pub m_v: f64,
    pub f_p: f64,
    pub f_v: f64,
    /// Mean L1 between predicted and ground-truth latent keypoints, when
    /// keypoints were produced.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kp_l1: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub m_p: f64,
    pub m_v: f64,
    pub f_p: f64,
    pub f_v: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kp_l1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedClip {
    pub id: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    pub clip_count: usize,
    pub config_hash: String,
    pub clips: Vec<ClipMetrics>,
    pub skipped: Vec<SkippedClip>,
    pub aggregate: Aggregate,
}

impl EvalReport {
    /// Builds a report whose aggregate is the mean of the per-clip rows.
    pub fn new(label: impl Into<String>, config_hash: String, clips: Vec<ClipMetrics>, skipped: Vec<SkippedClip>) -> Self {
        let n = clips.len().max(1) as f64;
        let mean = |f: fn(&ClipMetrics) -> f64| clips.iter().map(f).sum::<f64>() / n;
        let kp: Vec<f64> = clips.iter().filter_map(|c| c.kp_l1).collect();
        let aggregate = Aggregate {
            m_p: mean(|c| c.m_p),
            m_v: mean(|c| c.m_v),
            f_p: mean(|c| c.f_p),
            f_v: mean(|c| c.f_v),
            kp_l1: (!kp.is_empty() && kp.len() == clips.len()).then(|| kp.iter().sum::<f64>() / kp.len() as f64),
        };
        EvalReport {
            label: label.into(),
            clip_count: clips.len(),
            config_hash,
            clips,
            skipped,
            aggregate,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        io::read_json(path)
    }
}

/// Hex SHA-256 of a value's JSON serialization.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value).map_err(|e| invalid!("cannot serialize configuration: {e}"))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn check_pair(pred: &[LandmarkFrame], gt: &[LandmarkFrame]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(contract!("{} predicted frames vs {} ground-truth frames", pred.len(), gt.len()));
    }
    if pred.len() < 2 {
        return Err(invalid!("metrics need at least 2 frames, got {}", pred.len()));
    }
    if let Some(f) = pred.iter().chain(gt).find(|f| matches!(f.space(), Space::Raw | Space::Posed)) {
        return Err(contract!("metrics expect frontalized frames, got {:?}; frontalize first", f.space()));
    }
    Ok(())
}

/// Mean absolute position and first-difference errors over 2-D points.
fn pair_errors(pred: &[Vec<Point2>], gt: &[Vec<Point2>]) -> PairMetrics {
    let coords = |v: &[Point2]| v.iter().flatten().copied().collect::<Vec<f64>>();
    let p: Vec<Vec<f64>> = pred.iter().map(|v| coords(v)).collect();
    let g: Vec<Vec<f64>> = gt.iter().map(|v| coords(v)).collect();
    let n = p[0].len() as f64;
    let position = p.iter().zip(&g).map(|(a, b)| mae(a, b)).sum::<f64>() / p.len() as f64;
    let velocity = (1..p.len())
        .map(|t| {
            p[t].iter()
                .zip(&p[t - 1])
                .zip(g[t].iter().zip(&g[t - 1]))
                .map(|((a1, a0), (b1, b0))| ((a1 - a0) - (b1 - b0)).abs())
                .sum::<f64>()
                / n
        })
        .sum::<f64>()
        / (p.len() - 1) as f64;
    PairMetrics { position, velocity }
}

fn mae(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

fn mouth_points(frame: &LandmarkFrame) -> Result<Vec<Point2>> {
    let m = metric_normalize(frame)?;
    Ok(m.face()[MOUTH].iter().map(|p| [p[0], p[1]]).collect())
}

/// Recenters a frontal frame on its face centroid and scales it to an ear
/// distance of 2.
pub fn face_normalize(frame: &LandmarkFrame) -> Result<LandmarkFrame> {
    let c = frame.centroid();
    let shifted = frame.map_points(|_, p| [p[0] - c[0], p[1] - c[1], p[2] - c[2]], |_, e| [e[0] - c[0], e[1] - c[1]])?;
    let shifted = shifted.with_space(Space::Frontal)?;
    Ok(normalize_scale(&shifted)?.0)
}

fn face_points(frame: &LandmarkFrame) -> Result<Vec<Point2>> {
    Ok(face_normalize(frame)?.face().iter().map(|p| [p[0], p[1]]).collect())
}

/// `(M-P, M-V)` of two frontalized sequences of equal length ≥ 2.
pub fn mouth_metrics(pred: &[LandmarkFrame], gt: &[LandmarkFrame]) -> Result<PairMetrics> {
    check_pair(pred, gt)?;
    let p = pred.iter().map(mouth_points).collect::<Result<Vec<_>>>()?;
    let g = gt.iter().map(mouth_points).collect::<Result<Vec<_>>>()?;
    Ok(pair_errors(&p, &g))
}

/// `(F-P, F-V)` of two frontalized sequences of equal length ≥ 2.
pub fn face_metrics(pred: &[LandmarkFrame], gt: &[LandmarkFrame]) -> Result<PairMetrics> {
    check_pair(pred, gt)?;
    let p = pred.iter().map(face_points).collect::<Result<Vec<_>>>()?;
    let g = gt.iter().map(face_points).collect::<Result<Vec<_>>>()?;
    debug_assert_eq!(p[0].len(), FACE_POINTS);
    Ok(pair_errors(&p, &g))
}

/// Mean per-frame L1 between keypoint sequences.
pub fn keypoint_l1(pred: &[LatentKeypoints], gt: &[LatentKeypoints]) -> Result<f64> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(contract!("{} predicted keypoint frames vs {} ground-truth frames", pred.len(), gt.len()));
    }
    Ok(pred.iter().zip(gt).map(|(a, b)| a.mean_l1(b)).sum::<f64>() / pred.len() as f64)
}

/// Metrics of one clip. Degenerate faces surface as
/// [`Error::DegenerateFace`] so callers can skip the clip.
pub fn clip_metrics(
    id: &str,
    pred: &[LandmarkFrame],
    gt: &[LandmarkFrame],
    kps: Option<(&[LatentKeypoints], &[LatentKeypoints])>,
) -> Result<ClipMetrics> {
    let m = mouth_metrics(pred, gt)?;
    let f = face_metrics(pred, gt)?;
    let kp_l1 = kps.map(|(p, g)| keypoint_l1(p, g)).transpose()?;
    Ok(ClipMetrics {
        id: id.to_string(),
        frames: pred.len(),
        m_p: m.position,
        m_v: m.velocity,
        f_p: f.position,
        f_v: f.velocity,
        kp_l1,
    })
}

/// Collects per-clip results into a report, skipping degenerate clips with
/// a warning and propagating every other error.
pub fn collect_report(
    label: &str,
    config_hash: String,
    results: impl IntoIterator<Item = (String, Result<ClipMetrics>)>,
) -> Result<EvalReport> {
    let mut clips = Vec::new();
    let mut skipped = Vec::new();
    for (id, r) in results {
        match r {
            Ok(m) => clips.push(m),
            Err(Error::DegenerateFace(reason)) => {
                warn!("skipping clip {id}: degenerate face ({reason})");
                skipped.push(SkippedClip { id, reason });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(EvalReport::new(label, config_hash, clips, skipped))
}

/// Per-coordinate mean of frontal-normalized training frames, rescaled to
/// an ear distance of 2.
pub fn mean_face<'a>(frames: impl IntoIterator<Item = &'a LandmarkFrame>) -> Result<LandmarkFrame> {
    let mut face = vec![[0.0; 3]; FACE_POINTS];
    let mut eyes: Vec<Point2> = Vec::new();
    let mut n = 0usize;
    for f in frames {
        if eyes.is_empty() {
            eyes = vec![[0.0; 2]; f.eyes().len()];
        }
        face.iter_mut().zip(f.face()).for_each(|(a, p)| (0..3).for_each(|k| a[k] += p[k]));
        eyes.iter_mut().zip(f.eyes()).for_each(|(a, p)| (0..2).for_each(|k| a[k] += p[k]));
        n += 1;
    }
    if n == 0 {
        return Err(invalid!("mean face needs at least one frame"));
    }
    let k = 1.0 / n as f64;
    face.iter_mut().flatten().for_each(|v| *v *= k);
    eyes.iter_mut().flatten().for_each(|v| *v *= k);
    face_normalize(&LandmarkFrame::new(face, eyes, Space::Frontal)?)
}

/// Per-coordinate mean keypoints.
pub fn mean_keypoints<'a>(kps: impl IntoIterator<Item = &'a LatentKeypoints>) -> Result<LatentKeypoints> {
    let mut acc: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for k in kps {
        let v = k.flat();
        if acc.is_empty() {
            acc = vec![0.0; v.len()];
        }
        acc.iter_mut().zip(&v).for_each(|(a, x)| *a += x);
        n += 1;
    }
    if n == 0 {
        return Err(invalid!("mean keypoints need at least one frame"));
    }
    acc.iter_mut().for_each(|v| *v /= n as f64);
    LatentKeypoints::from_flat(&acc)
}

/// Runs the full pipeline on every clip with the clip's own source face,
/// emotion and ground-truth poses (pose transfer), and scores the S2L
/// landmarks and L2L keypoints against the clip's ground truth. Clips are
/// evaluated in parallel.
pub fn evaluate(models: &Models, clips: &[ClipRecord], label: &str) -> Result<EvalReport> {
    let ids: Vec<&str> = clips.iter().map(|c| c.id.as_str()).collect();
    let hash = config_hash(&serde_json::json!({ "models": models.summary, "clips": ids }))?;
    let results: Vec<(String, Result<ClipMetrics>)> = clips
        .par_iter()
        .map(|clip| (clip.id.clone(), evaluate_clip(models, clip)))
        .collect();
    collect_report(label, hash, results)
}

fn evaluate_clip(models: &Models, clip: &ClipRecord) -> Result<ClipMetrics> {
    let req = InferenceRequest {
        source: clip.source.clone(),
        source_pose: clip.poses[0],
        source_kp: clip.source_kp.clone(),
        audio: clip.waveform.clone(),
        pose: PoseSource::Transfer(clip.poses.clone()),
        emotion: clip.emotion,
        seed: 0,
        edits: Default::default(),
    };
    let out = infer(&req, models)?;
    clip_metrics(&clip.id, &out.s2l, &clip.frames, Some((&out.latents, &clip.latents)))
}

/// Constant predictors fitted on training clips: the mean face for every
/// landmark frame and the mean keypoints for every keypoint frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Baselines {
    pub face: LandmarkFrame,
    pub keypoints: LatentKeypoints,
}

impl Baselines {
    pub fn fit(train: &[ClipRecord]) -> Result<Self> {
        Ok(Baselines {
            face: mean_face(train.iter().flat_map(|c| &c.frames))?,
            keypoints: mean_keypoints(train.iter().flat_map(|c| &c.latents))?,
        })
    }

    pub fn evaluate(&self, clips: &[ClipRecord], label: &str) -> Result<EvalReport> {
        let ids: Vec<&str> = clips.iter().map(|c| c.id.as_str()).collect();
        let hash = config_hash(&serde_json::json!({ "baseline": label, "clips": ids }))?;
        let results = clips.iter().map(|c| {
            let faces = vec![self.face.clone(); c.len()];
            let kps = vec![self.keypoints.clone(); c.len()];
            (c.id.clone(), clip_metrics(&c.id, &faces, &c.frames, Some((&kps, &c.latents))))
        });
        collect_report(label, hash, results)
    }
}

#[cfg(test)]
mod tests;
