use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::emotion::EmotionVector;
use super::face::{emotion_offsets, render_frame, Expression, Identity};
use super::oracle::{LatentKeypoints, LatentOracle};
use crate::audiofeat::{hop_length, Waveform, DEFAULT_SAMPLE_RATE, VIDEO_FPS};
use crate::error::{invalid, Result};
use crate::geometry::{apply_pose, HeadPose, LandmarkFrame};

/// Jaw opening per unit of frame envelope.
pub const MOUTH_GAIN: f64 = 0.25;
/// Frames between an audio envelope value and the jaw opening it drives.
pub const MOUTH_LAG: usize = 1;
/// Clean pose trajectories stay within this many degrees on every axis.
pub const MAX_CLEAN_ANGLE: f64 = 25.0;
pub const BLINK_FRAMES: f64 = 7.0;

pub const MIN_DURATION: f64 = 1.0;
pub const MAX_DURATION: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    /// In-plane 45° cut halfway through the clip.
    TemporalJump,
    /// Head turned past 90° for a few frames.
    Rotation,
    /// Scale sweeping to 2.7× its starting value.
    ScaleSweep,
}

impl AnomalyKind {
    pub const ALL: [AnomalyKind; 3] = [
        AnomalyKind::TemporalJump,
        AnomalyKind::Rotation,
        AnomalyKind::ScaleSweep,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipSpec {
    pub duration_secs: f64,
    pub emotion: EmotionVector,
    /// No speech at all: digital silence and a closed mouth.
    pub silent: bool,
    pub sample_rate: u32,
    pub oracle_seed: u64,
    pub anomaly: Option<AnomalyKind>,
}

impl Default for ClipSpec {
    fn default() -> Self {
        ClipSpec {
            duration_secs: 3.0,
            emotion: EmotionVector::neutral(),
            silent: false,
            sample_rate: DEFAULT_SAMPLE_RATE,
            oracle_seed: 0,
            anomaly: None,
        }
    }
}

impl ClipSpec {
    pub fn validate(&self) -> Result<()> {
        if !(MIN_DURATION..=MAX_DURATION).contains(&self.duration_secs) {
            return Err(invalid!(
                "clip duration {} s outside [{MIN_DURATION}, {MAX_DURATION}]",
                self.duration_secs
            ));
        }
        if self.sample_rate < 8000 {
            return Err(invalid!("sample rate {} below 8000 Hz", self.sample_rate));
        }
        EmotionVector::new(*self.emotion.weights())?;
        Ok(())
    }

    pub fn frames(&self) -> usize {
        (self.duration_secs * VIDEO_FPS).round() as usize
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClipFlags {
    pub anomaly: Option<AnomalyKind>,
    /// Stand-in for a hand detector; synthetic clips never show hands.
    pub hand_present: bool,
}

/// One generated clip. All sequences have the same length.
#[derive(Clone, Debug, PartialEq)]
pub struct ClipRecord {
    pub id: String,
    pub waveform: Waveform,
    /// Frontal-normalized landmarks.
    pub frames: Vec<LandmarkFrame>,
    pub poses: Vec<HeadPose>,
    pub latents: Vec<LatentKeypoints>,
    pub emotion: EmotionVector,
    /// Neutral, mouth-closed face of the clip's identity.
    pub source: LandmarkFrame,
    /// Oracle keypoints of the source face under the first pose.
    pub source_kp: LatentKeypoints,
    pub fps: f64,
    pub flags: ClipFlags,
    /// Per-frame mean of the syllable amplitude envelope.
    pub envelope: Vec<f64>,
    pub mouth_open: Vec<f64>,
}

impl ClipRecord {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn posed_frames(&self) -> Result<Vec<LandmarkFrame>> {
        self.frames
            .iter()
            .zip(&self.poses)
            .map(|(f, p)| apply_pose(f, p))
            .collect()
    }
}

struct Syllable {
    start: usize,
    end: usize,
    amp: f64,
    formants: [f64; 3],
}

fn syllables(rng: &mut ChaCha8Rng, n: usize, sr: f64) -> Vec<Syllable> {
    let mut out = Vec::new();
    let mut t = rng.gen_range(0.1..0.4) * sr;
    let tail = 0.1 * sr;
    loop {
        let dur = rng.gen_range(0.10..0.28) * sr;
        if t + dur > n as f64 - tail {
            break;
        }
        out.push(Syllable {
            start: t as usize,
            end: (t + dur) as usize,
            amp: rng.gen_range(0.35..0.9),
            formants: [
                rng.gen_range(300.0..800.0),
                rng.gen_range(900.0..2200.0),
                rng.gen_range(2400.0..3200.0),
            ],
        });
        let gap = if rng.gen_bool(0.25) {
            rng.gen_range(0.15..0.5)
        } else {
            rng.gen_range(0.02..0.08)
        };
        t += dur + gap * sr;
    }
    out
}

/// Formant-like tones under a raised-cosine syllable envelope. Returns the
/// samples and the envelope.
fn synth_audio(rng: &mut ChaCha8Rng, n: usize, sr: f64, silent: bool) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut env = vec![0.0; n];
    let f0 = rng.gen_range(100.0..220.0);
    let sylls = syllables(rng, n, sr);
    if silent {
        return (x, env);
    }
    for s in &sylls {
        let len = (s.end - s.start) as f64;
        let phases: [f64; 3] = [rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI)];
        for i in s.start..s.end {
            let t = i as f64 / sr;
            let e = s.amp * (PI * (i - s.start) as f64 / len).sin().powi(2);
            let carrier = 0.55 * (2.0 * PI * s.formants[0] * t + phases[0]).sin()
                + 0.30 * (2.0 * PI * s.formants[1] * t + phases[1]).sin()
                + 0.15 * (2.0 * PI * s.formants[2] * t + phases[2]).sin();
            let buzz = (1.0 + 0.25 * (2.0 * PI * f0 * t).sin()) / 1.25;
            env[i] = e;
            x[i] = e * carrier * buzz;
        }
    }
    (x, env)
}

/// Mean of `env` over the hop-wide window centred on each frame.
fn frame_envelope(env: &[f64], frames: usize, hop: usize) -> Vec<f64> {
    (0..frames)
        .map(|t| {
            let c = (t * hop) as isize;
            let lo = (c - hop as isize / 2).max(0) as usize;
            let hi = ((c + hop as isize / 2) as usize).min(env.len());
            if hi <= lo {
                0.0
            } else {
                env[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
            }
        })
        .collect()
}

/// Two-pole low-passed white noise rescaled to unit standard deviation.
fn smooth_noise(rng: &mut ChaCha8Rng, n: usize, alpha: f64) -> Vec<f64> {
    let (mut y1, mut y2) = (0.0, 0.0);
    let raw: Vec<f64> = (0..n + 30)
        .map(|_| {
            let w: f64 = StandardNormal.sample(rng);
            y1 = alpha * y1 + (1.0 - alpha) * w;
            y2 = alpha * y2 + (1.0 - alpha) * y1;
            y2
        })
        .skip(30)
        .collect();
    let mean = raw.iter().sum::<f64>() / n as f64;
    let std = (raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    raw.iter().map(|v| if std > 0.0 { (v - mean) / std } else { 0.0 }).collect()
}

fn pose_track(rng: &mut ChaCha8Rng, envelope: &[f64]) -> Vec<HeadPose> {
    let n = envelope.len();
    let mut axis = |base: f64, std: f64| -> Vec<f64> {
        let b = rng.gen_range(-base..=base);
        smooth_noise(rng, n, 0.92).into_iter().map(|v| b + std * v).collect()
    };
    let yaw = axis(8.0, 6.0);
    let pitch = axis(5.0, 3.0);
    let roll = axis(4.0, 2.0);
    let tx = axis(0.1, 0.03);
    let ty = axis(0.1, 0.03);
    let tz = axis(0.0, 0.02);
    let s0 = rng.gen_range(0.85..1.15);
    let sn = smooth_noise(rng, n, 0.95);
    let clamp = |a: f64| a.clamp(-MAX_CLEAN_ANGLE, MAX_CLEAN_ANGLE);
    (0..n)
        .map(|t| HeadPose {
            yaw: clamp(yaw[t]),
            // speakers nod slightly with loudness
            pitch: clamp(pitch[t] + 4.0 * envelope[t]),
            roll: clamp(roll[t]),
            tx: tx[t],
            ty: ty[t],
            tz: tz[t],
            scale: s0 * (1.0 + (0.02 * sn[t]).clamp(-0.04, 0.04)),
        })
        .collect()
}

/// Blink centres in frames.
fn blink_events(rng: &mut ChaCha8Rng, frames: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = rng.gen_range(0.5..2.5) * VIDEO_FPS;
    while t < frames as f64 {
        out.push(t.round());
        t += rng.gen_range(2.0..5.0) * VIDEO_FPS;
    }
    out
}

/// Lid aperture factor: triangle dips of `duration` frames to 0 at each
/// event centre, overlapping events merged by taking the minimum.
pub fn blink_aperture(t: usize, centers: &[f64], duration: f64) -> f64 {
    let half = duration / 2.0;
    centers
        .iter()
        .map(|c| ((t as f64 - c).abs() / half).min(1.0))
        .fold(1.0, f64::min)
}

/// Generates one clip. Every random draw is independent of the emotion, so
/// clips differing only in emotion share audio, pose and blinks.
pub fn generate_clip(spec: &ClipSpec, seed: u64) -> Result<ClipRecord> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = spec.frames();
    let hop = hop_length(spec.sample_rate);
    let n = frames * hop;
    let sr = spec.sample_rate as f64;

    let identity = Identity::random(&mut rng);
    let (samples, env) = synth_audio(&mut rng, n, sr, spec.silent);
    let envelope = frame_envelope(&env, frames, hop);
    let mut poses = pose_track(&mut rng, &envelope);
    let blinks = blink_events(&mut rng, frames);

    let mouth_open: Vec<f64> = (0..frames)
        .map(|t| {
            if t >= MOUTH_LAG {
                MOUTH_GAIN * envelope[t - MOUTH_LAG]
            } else {
                0.0
            }
        })
        .collect();
    let offsets = emotion_offsets(&spec.emotion);
    let mut out_frames = (0..frames)
        .map(|t| {
            let ex = Expression {
                mouth_open: mouth_open[t],
                eye_aperture: blink_aperture(t, &blinks, BLINK_FRAMES),
                gaze: [0.0, 0.0],
            };
            render_frame(&identity, &ex, &offsets)
        })
        .collect::<Result<Vec<_>>>()?;
    let source = render_frame(&identity, &Expression::REST, &vec![[0.0; 3]; offsets.len()])?;

    match spec.anomaly {
        None => {}
        Some(AnomalyKind::TemporalJump) => {
            let (s, c) = (PI / 4.0).sin_cos();
            for f in out_frames.iter_mut().skip(frames / 2) {
                *f = f.map_points(
                    |_, p| [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]],
                    |_, e| [c * e[0] - s * e[1], s * e[0] + c * e[1]],
                )?;
            }
        }
        Some(AnomalyKind::Rotation) => {
            let start = frames / 3;
            let ramp = [60.0, 80.0, 95.0, 95.0, 95.0, 80.0, 60.0];
            for (k, a) in ramp.iter().enumerate() {
                if let Some(p) = poses.get_mut(start + k) {
                    p.yaw = *a;
                }
            }
        }
        Some(AnomalyKind::ScaleSweep) => {
            let s0 = poses[0].scale;
            let last = (frames - 1).max(1) as f64;
            for (t, p) in poses.iter_mut().enumerate() {
                p.scale = s0 * (1.0 + 1.7 * t as f64 / last);
            }
        }
    }

    let oracle = LatentOracle::new(spec.oracle_seed);
    let latents = out_frames
        .iter()
        .zip(&poses)
        .map(|(f, p)| oracle.apply(&apply_pose(f, p)?))
        .collect::<Result<Vec<_>>>()?;
    let source_kp = oracle.apply(&apply_pose(&source, &poses[0])?)?;

    Ok(ClipRecord {
        id: format!("clip-{seed:016x}"),
        waveform: Waveform::new(samples, spec.sample_rate)?,
        frames: out_frames,
        poses,
        latents,
        emotion: spec.emotion,
        source,
        source_kp,
        fps: VIDEO_FPS,
        flags: ClipFlags {
            anomaly: spec.anomaly,
            hand_present: false,
        },
        envelope,
        mouth_open,
    })
}
