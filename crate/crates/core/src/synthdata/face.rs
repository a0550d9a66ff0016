//! Procedural 68-point face with a per-clip identity, jaw opening, eyelid
//! aperture, gaze and emotion offset fields.

use std::f64::consts::PI;

use rand::Rng;

use super::emotion::{Emotion, EmotionVector};
use crate::error::Result;
use crate::geometry::layout::*;
use crate::geometry::{normalize_scale, LandmarkFrame, Point2, Point3, Space};

const EYE_HALF_WIDTH: f64 = 0.14;
const UPPER_LID: f64 = 0.055;
const LOWER_LID: f64 = 0.045;
const IRIS_RADIUS: f64 = 0.04;

/// Per-clip face shape. Every field is a small perturbation of the template.
#[derive(Clone, Debug, PartialEq)]
pub struct Identity {
    pub width: f64,
    pub height: f64,
    pub eye_spacing: f64,
    pub eye_height: f64,
    pub mouth_width: f64,
    pub mouth_height: f64,
    pub nose_length: f64,
    pub brow_height: f64,
    pub jitter: Vec<Point3>,
}

impl Identity {
    pub fn template() -> Self {
        Identity {
            width: 1.0,
            height: 1.0,
            eye_spacing: 0.0,
            eye_height: 0.0,
            mouth_width: 1.0,
            mouth_height: 0.0,
            nose_length: 0.0,
            brow_height: 0.0,
            jitter: vec![[0.0; 3]; FACE_POINTS],
        }
    }

    pub fn random(rng: &mut impl Rng) -> Self {
        let mut u = |r: f64| rng.gen_range(-r..=r);
        let width = 1.0 + u(0.06);
        let height = 1.0 + u(0.10);
        let eye_spacing = u(0.04);
        let eye_height = u(0.03);
        let mouth_width = 1.0 + u(0.10);
        let mouth_height = u(0.04);
        let nose_length = u(0.04);
        let brow_height = u(0.03);
        let jitter = (0..FACE_POINTS)
            .map(|i| {
                if i == EAR_LEFT || i == EAR_RIGHT {
                    [0.0, 0.0, 0.0]
                } else {
                    [u(0.012), u(0.012), u(0.012)]
                }
            })
            .collect();
        Identity {
            width,
            height,
            eye_spacing,
            eye_height,
            mouth_width,
            mouth_height,
            nose_length,
            brow_height,
            jitter,
        }
    }

    fn eye_center(&self, eye: usize) -> [f64; 3] {
        let side = if eye == 0 { -1.0 } else { 1.0 };
        [side * (0.42 + self.eye_spacing), 0.30 + self.eye_height, 0.20]
    }

    fn mouth_center(&self) -> [f64; 3] {
        [0.0, -0.45 + self.mouth_height, 0.30]
    }
}

/// Time-varying controls of one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Expression {
    /// Jaw opening in face units (0 = closed).
    pub mouth_open: f64,
    /// Eyelid aperture, 1 = open, 0 = closed.
    pub eye_aperture: f64,
    /// Pupil offset from the eye centre.
    pub gaze: Point2,
}

impl Expression {
    pub const REST: Expression = Expression {
        mouth_open: 0.0,
        eye_aperture: 1.0,
        gaze: [0.0, 0.0],
    };
}

fn mirror(p: Point3) -> Point3 {
    [-p[0], p[1], p[2]]
}

/// Unnormalized, uncentred face points for an identity and expression.
fn face_points(id: &Identity, ex: &Expression) -> Vec<Point3> {
    let mut f = vec![[0.0; 3]; FACE_POINTS];
    let open = ex.mouth_open.max(0.0);
    for (i, p) in f.iter_mut().enumerate().take(17) {
        let th = PI * i as f64 / 16.0;
        let s = th.sin();
        // lower jaw follows the mouth opening, ears stay put
        let drop = 0.55 * open * s.powi(2);
        *p = [-th.cos(), 0.25 - 1.05 * s * id.height - drop, -0.45 + 0.5 * s];
    }
    for k in 0..5 {
        let t = k as f64 / 4.0;
        let arch = 0.07 * (1.0 - (2.0 * t - 1.0).powi(2));
        let left = [-0.78 + 0.6 * t, 0.58 + arch + id.brow_height, 0.15 + 0.08 * t];
        f[BROW_LEFT.start + k] = left;
        f[BROW_RIGHT.start + 4 - k] = mirror(left);
    }
    for k in 0..4 {
        let t = k as f64 / 3.0;
        f[NOSE_BRIDGE.start + k] = [0.0, 0.38 - (0.39 + id.nose_length) * t, 0.25 + 0.30 * t];
    }
    for k in 0..5 {
        let c = 1.0 - (k as f64 - 2.0).abs() / 2.0;
        f[NOSE_BOTTOM.start + k] = [
            -0.16 + 0.08 * k as f64,
            -0.12 - id.nose_length + 0.03 * c,
            0.35 + 0.06 * c,
        ];
    }
    for eye in 0..2 {
        let c = id.eye_center(eye);
        let a = ex.eye_aperture.clamp(0.0, 1.0);
        let lid = |dx: f64, upper: bool| {
            let h = if upper { UPPER_LID } else { -LOWER_LID };
            let y = c[1] + h * a * (1.0 - (dx / EYE_HALF_WIDTH).powi(2)).max(0.0).sqrt();
            [c[0] + dx, y, c[2]]
        };
        // corner, two upper-lid points, corner, two lower-lid points
        let base = if eye == 0 { EYE_LEFT.start } else { EYE_RIGHT.start };
        let w = EYE_HALF_WIDTH;
        let pts = [
            lid(-w, true),
            lid(-0.05, true),
            lid(0.05, true),
            lid(w, true),
            lid(0.05, false),
            lid(-0.05, false),
        ];
        for (k, p) in pts.into_iter().enumerate() {
            f[base + k] = p;
        }
    }
    let mc = id.mouth_center();
    let mw = 0.38 * id.mouth_width;
    let outer_angle = |k: usize| -> f64 {
        match k {
            0 => PI,
            1..=5 => PI - k as f64 * PI / 6.0,
            6 => 0.0,
            _ => -((k - 6) as f64) * PI / 6.0,
        }
    };
    for k in 0..12 {
        let a = outer_angle(k);
        let s = a.sin();
        let upper = s > 1e-12;
        let h = if upper { 0.10 } else { 0.12 };
        let corner_pull = 0.10 * open * a.cos();
        let dy = if upper { 0.15 * open * s.abs() } else { -open * s.abs() };
        f[MOUTH_OUTER.start + k] = [
            mc[0] + mw * a.cos() - corner_pull,
            mc[1] + h * s + dy,
            0.22 + 0.10 * s.abs(),
        ];
    }
    let iw = 0.26 * id.mouth_width;
    let inner_angle = |k: usize| -> f64 {
        match k {
            0 => PI,
            1..=3 => PI - k as f64 * PI / 4.0,
            4 => 0.0,
            _ => -((k - 4) as f64) * PI / 4.0,
        }
    };
    for k in 0..8 {
        let a = inner_angle(k);
        let s = a.sin();
        let upper = s > 1e-12;
        let corner_pull = 0.10 * open * a.cos();
        let dy = if upper {
            0.01 * s + 0.15 * open * s.abs()
        } else {
            -0.01 * s.abs() - open * s.abs()
        };
        f[MOUTH_INNER.start + k] = [
            mc[0] + iw * a.cos() - corner_pull,
            mc[1] + dy,
            0.28 + 0.04 * s.abs(),
        ];
    }
    for (p, j) in f.iter_mut().zip(&id.jitter) {
        p[0] = p[0] * if p[0].abs() < 0.999 { id.width } else { 1.0 } + j[0];
        p[1] += j[1];
        p[2] += j[2];
    }
    f
}

/// 52 eye landmarks: per eye 10 upper-lid points, 10 lower-lid points, the
/// pupil and 5 iris ring points.
fn eye_points(id: &Identity, ex: &Expression) -> Vec<Point2> {
    let mut e = Vec::with_capacity(EYE_POINTS);
    let a = ex.eye_aperture.clamp(0.0, 1.0);
    for eye in 0..2 {
        let c = id.eye_center(eye);
        let xs: Vec<f64> = (0..LID_POINTS)
            .map(|k| -EYE_HALF_WIDTH * (PI * (k as f64 + 0.5) / LID_POINTS as f64).cos())
            .collect();
        let bump = |k: usize| (PI * (k as f64 + 0.5) / LID_POINTS as f64).sin();
        for (k, x) in xs.iter().enumerate() {
            e.push([c[0] + x, c[1] + UPPER_LID * a * bump(k)]);
        }
        for (k, x) in xs.iter().enumerate() {
            e.push([c[0] + x, c[1] - LOWER_LID * a * bump(k)]);
        }
        let pupil = [c[0] + ex.gaze[0], c[1] + ex.gaze[1]];
        e.push(pupil);
        for j in 0..5 {
            let ang = PI / 2.0 + 2.0 * PI * j as f64 / 5.0;
            e.push([pupil[0] + IRIS_RADIUS * ang.cos(), pupil[1] + IRIS_RADIUS * ang.sin()]);
        }
    }
    e.iter_mut().for_each(|p| p[0] *= id.width);
    e
}

/// Sparse displacement field of one emotion at full intensity.
pub fn emotion_field(e: Emotion) -> Vec<Point3> {
    let mut d = vec![[0.0; 3]; FACE_POINTS];
    let mut set = |i: usize, v: Point3| d[i] = v;
    match e {
        Emotion::Neutral => {}
        Emotion::Happy => {
            set(48, [-0.04, 0.07, 0.0]);
            set(54, [0.04, 0.07, 0.0]);
            set(49, [-0.01, 0.03, 0.0]);
            set(53, [0.01, 0.03, 0.0]);
            set(59, [-0.01, 0.03, 0.0]);
            set(55, [0.01, 0.03, 0.0]);
            set(60, [-0.03, 0.05, 0.0]);
            set(64, [0.03, 0.05, 0.0]);
        }
        Emotion::Sad => {
            set(48, [0.0, -0.06, 0.0]);
            set(54, [0.0, -0.06, 0.0]);
            set(60, [0.0, -0.04, 0.0]);
            set(64, [0.0, -0.04, 0.0]);
            set(21, [0.01, 0.05, 0.0]);
            set(22, [-0.01, 0.05, 0.0]);
            set(20, [0.0, 0.03, 0.0]);
            set(23, [0.0, 0.03, 0.0]);
        }
        Emotion::Angry => {
            for i in 19..22 {
                set(i, [0.02, -0.06, 0.0]);
            }
            for i in 22..25 {
                set(i, [-0.02, -0.06, 0.0]);
            }
            for i in [61, 62, 63] {
                set(i, [0.0, -0.01, 0.0]);
            }
            for i in [65, 66, 67] {
                set(i, [0.0, 0.01, 0.0]);
            }
        }
        Emotion::Fear => {
            for i in 17..27 {
                set(i, [0.0, 0.05, 0.0]);
            }
            set(48, [-0.05, -0.02, 0.0]);
            set(54, [0.05, -0.02, 0.0]);
            set(60, [-0.04, -0.01, 0.0]);
            set(64, [0.04, -0.01, 0.0]);
        }
        Emotion::Surprise => {
            for i in 17..27 {
                set(i, [0.0, 0.09, 0.0]);
            }
            for i in 55..60 {
                set(i, [0.0, -0.06, 0.0]);
            }
            for i in 65..68 {
                set(i, [0.0, -0.06, 0.0]);
            }
            for i in 6..11 {
                set(i, [0.0, -0.04, 0.0]);
            }
        }
        Emotion::Disgust => {
            for i in 50..53 {
                set(i, [0.0, 0.05, 0.0]);
            }
            for i in 61..64 {
                set(i, [0.0, 0.04, 0.0]);
            }
            for i in 31..36 {
                set(i, [0.0, 0.03, 0.0]);
            }
            set(21, [0.01, -0.03, 0.0]);
            set(22, [-0.01, -0.03, 0.0]);
        }
        Emotion::Contempt => {
            set(54, [0.03, 0.05, 0.0]);
            set(64, [0.02, 0.04, 0.0]);
            set(53, [0.01, 0.02, 0.0]);
            set(55, [0.01, 0.02, 0.0]);
        }
    }
    d
}

/// Weighted sum of the emotion fields.
pub fn emotion_offsets(e: &EmotionVector) -> Vec<Point3> {
    let mut out = vec![[0.0; 3]; FACE_POINTS];
    for emo in Emotion::ALL {
        let w = e.weight(emo);
        if w == 0.0 {
            continue;
        }
        for (o, d) in out.iter_mut().zip(emotion_field(emo)) {
            for k in 0..3 {
                o[k] += w * d[k];
            }
        }
    }
    out
}

/// Builds a frontal-normalized frame: points are centred on the face
/// centroid and scaled so the ear landmarks are 2 apart.
pub fn render_frame(id: &Identity, ex: &Expression, offsets: &[Point3]) -> Result<LandmarkFrame> {
    let mut face = face_points(id, ex);
    for (p, o) in face.iter_mut().zip(offsets) {
        for k in 0..3 {
            p[k] += o[k];
        }
    }
    let eyes = eye_points(id, ex);
    let c = crate::geometry::centroid(&face);
    let face = face
        .into_iter()
        .map(|p| [p[0] - c[0], p[1] - c[1], p[2] - c[2]])
        .collect();
    let eyes = eyes.into_iter().map(|e| [e[0] - c[0], e[1] - c[1]]).collect();
    let frame = LandmarkFrame::new(face, eyes, Space::Frontal)?;
    Ok(normalize_scale(&frame)?.0)
}

/// Vertical gap between the inner-lip midpoints (landmarks 62 and 66).
pub fn jaw_opening(frame: &LandmarkFrame) -> f64 {
    frame.face()[62][1] - frame.face()[66][1]
}
