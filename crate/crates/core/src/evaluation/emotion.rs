//! Emotion-control measurements: the direction an emotion moves the mouth
//! corners in a corpus, and how far a model's output moves along it as the
//! emotion intensity is swept.

use crate::audiofeat::AudioFeatures;
use crate::error::{invalid, Result};
use crate::geometry::layout::{MOUTH_LEFT, MOUTH_RIGHT};
use crate::geometry::LandmarkFrame;
use crate::models::S2l;
use crate::synthdata::{ClipRecord, Emotion, EmotionVector};

/// `(x, y)` of the left then right mouth corner.
pub type CornerVector = [f64; 4];

fn corners(f: &LandmarkFrame) -> CornerVector {
    let (l, r) = (f.face()[MOUTH_LEFT], f.face()[MOUTH_RIGHT]);
    [l[0], l[1], r[0], r[1]]
}

/// Mean corner displacement of a sequence relative to a rest face.
pub fn corner_offset(frames: &[LandmarkFrame], rest: &LandmarkFrame) -> Result<CornerVector> {
    if frames.is_empty() {
        return Err(invalid!("corner offset of an empty sequence"));
    }
    let base = corners(rest);
    let mut acc = [0.0; 4];
    for f in frames {
        for (a, (c, b)) in acc.iter_mut().zip(corners(f).iter().zip(base)) {
            *a += c - b;
        }
    }
    Ok(acc.map(|v| v / frames.len() as f64))
}

/// Intensity-weighted mean corner offset of the clips labelled `emotion`,
/// minus the mean offset of neutral clips.
pub fn emotion_direction(clips: &[ClipRecord], emotion: Emotion) -> Result<CornerVector> {
    let mut with = ([0.0; 4], 0.0);
    let mut without = ([0.0; 4], 0.0);
    for c in clips {
        let w = c.emotion.weight(emotion);
        let off = corner_offset(&c.frames, &c.source)?;
        let (acc, n) = if w > 0.0 {
            (&mut with, w)
        } else if c.emotion.dominant() == Emotion::Neutral {
            (&mut without, 1.0)
        } else {
            continue;
        };
        for (a, o) in acc.0.iter_mut().zip(off) {
            *a += n * o;
        }
        acc.1 += n;
    }
    if with.1 == 0.0 || without.1 == 0.0 {
        return Err(invalid!("need both {emotion} and neutral clips to estimate a direction"));
    }
    Ok(std::array::from_fn(|k| with.0[k] / with.1 - without.0[k] / without.1))
}

/// Projection of the rollout's corner offset onto `direction` for each
/// intensity, with audio and source fixed.
pub fn intensity_sweep(
    model: &S2l,
    source: &LandmarkFrame,
    audio: &AudioFeatures,
    emotion: Emotion,
    intensities: &[f64],
    direction: &CornerVector,
) -> Result<Vec<f64>> {
    intensities
        .iter()
        .map(|&s| {
            let out = model.rollout(source, audio, &EmotionVector::one_hot(emotion, s)?, None, None)?;
            let off = corner_offset(&out, source)?;
            Ok(off.iter().zip(direction).map(|(a, b)| a * b).sum())
        })
        .collect()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation, with tied values given their average rank.
/// Returns 0 when either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(invalid!("rank correlation needs two equal-length series of at least 2 values"));
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - mean) * (y - mean);
        va += (x - mean).powi(2);
        vb += (y - mean).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (va * vb).sqrt())
}
