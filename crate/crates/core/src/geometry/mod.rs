//! Landmark coordinate transforms: rotation construction, frontalization,
//! scale normalization, pose application, projection and the mouth-anchored
//! metric frame.
//!
//! Conventions:
//! - Rotations are `R = Rz(roll) · Rx(pitch) · Ry(yaw)`, angles in degrees at
//!   the API boundary and radians internally.
//! - `x` points right, `y` up and `z` towards the camera, so orthographic
//!   projection drops `z`.
//! - Face landmarks are 3D. The 52 eye landmarks are 2D and follow only the
//!   in-plane part of a pose (roll, scale, `tx`, `ty`), which keeps every
//!   transform exactly invertible.
//! - Scale normalization fixes the distance between landmarks 0 and 16 (the
//!   ends of the jaw contour) to 2.

pub mod layout;

use serde::{Deserialize, Serialize};

use crate::error::{contract, invalid, Error, Result};
use layout::*;

pub type Point3 = [f64; 3];
pub type Point2 = [f64; 2];

/// Tolerance of the ear-distance invariant in the normalized space.
pub const EAR_DISTANCE_TOL: f64 = 1e-9;
const DEGENERATE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Raw,
    Frontal,
    FrontalNormalized,
    Posed,
    Metric,
}

/// One frame of 68 3D face landmarks plus 52 2D eye landmarks.
#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkFrame {
    face: Vec<Point3>,
    eyes: Vec<Point2>,
    space: Space,
}

impl LandmarkFrame {
    /// Validating constructor: exact point counts, finite coordinates, and the
    /// ear-distance invariant when `space` is [`Space::FrontalNormalized`].
    pub fn new(face: Vec<Point3>, eyes: Vec<Point2>, space: Space) -> Result<Self> {
        let frame = Self::new_unchecked(face, eyes, space)?;
        if !frame.is_finite() {
            return Err(invalid!("landmark frame has non-finite coordinates"));
        }
        if space == Space::FrontalNormalized {
            let d = frame.ear_distance();
            if (d - 2.0).abs() > EAR_DISTANCE_TOL {
                return Err(contract!(
                    "frontal_normalized frame has ear distance {d}, expected 2"
                ));
            }
        }
        Ok(frame)
    }

    /// Checks only the point counts. Used for detector output that may carry
    /// missing (non-finite) points, which the corpus filters reject.
    pub fn new_unchecked(face: Vec<Point3>, eyes: Vec<Point2>, space: Space) -> Result<Self> {
        if face.len() != FACE_POINTS {
            return Err(invalid!("expected {FACE_POINTS} face points, got {}", face.len()));
        }
        if eyes.len() != EYE_POINTS {
            return Err(invalid!("expected {EYE_POINTS} eye points, got {}", eyes.len()));
        }
        Ok(LandmarkFrame { face, eyes, space })
    }

    /// Rebuilds a frame from flattened `68·3` face and `52·2` eye coordinates.
    pub fn from_flat(face: &[f64], eyes: &[f64], space: Space) -> Result<Self> {
        if face.len() != FACE_DIM || eyes.len() != EYE_DIM {
            return Err(invalid!(
                "flat landmark lengths {} / {} (expected {FACE_DIM} / {EYE_DIM})",
                face.len(),
                eyes.len()
            ));
        }
        let face = face.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let eyes = eyes.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        Self::new(face, eyes, space)
    }

    pub fn face(&self) -> &[Point3] {
        &self.face
    }

    pub fn eyes(&self) -> &[Point2] {
        &self.eyes
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn is_finite(&self) -> bool {
        self.face.iter().flatten().all(|v| v.is_finite())
            && self.eyes.iter().flatten().all(|v| v.is_finite())
    }

    pub fn flat_face(&self) -> Vec<f64> {
        self.face.iter().flatten().copied().collect()
    }

    pub fn flat_eyes(&self) -> Vec<f64> {
        self.eyes.iter().flatten().copied().collect()
    }

    pub fn ear_distance(&self) -> f64 {
        dist3(&self.face[EAR_LEFT], &self.face[EAR_RIGHT])
    }

    pub fn centroid(&self) -> Point3 {
        centroid(&self.face)
    }

    /// Same points relabelled with another coordinate space; the invariant
    /// of the target space is re-checked.
    pub fn with_space(self, space: Space) -> Result<Self> {
        Self::new(self.face, self.eyes, space)
    }

    /// Point-wise edit that keeps the space tag; the result is re-validated.
    pub fn map_points(
        &self,
        mut face_fn: impl FnMut(usize, Point3) -> Point3,
        mut eye_fn: impl FnMut(usize, Point2) -> Point2,
    ) -> Result<Self> {
        let face = self.face.iter().enumerate().map(|(i, &p)| face_fn(i, p)).collect();
        let eyes = self.eyes.iter().enumerate().map(|(i, &p)| eye_fn(i, p)).collect();
        Self::new(face, eyes, self.space)
    }
}

/// Rotation, translation and isotropic scale of a head.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadPose {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
    pub scale: f64,
}

impl Default for HeadPose {
    fn default() -> Self {
        HeadPose::IDENTITY
    }
}

impl HeadPose {
    pub const IDENTITY: HeadPose = HeadPose {
        yaw: 0.0,
        pitch: 0.0,
        roll: 0.0,
        tx: 0.0,
        ty: 0.0,
        tz: 0.0,
        scale: 1.0,
    };

    pub fn validate(&self) -> Result<()> {
        let angles = [self.yaw, self.pitch, self.roll];
        if angles.iter().any(|a| !a.is_finite() || a.abs() > 180.0) {
            return Err(invalid!("pose angles must be finite and within ±180°: {angles:?}"));
        }
        if ![self.tx, self.ty, self.tz].iter().all(|v| v.is_finite()) {
            return Err(invalid!("pose translation must be finite"));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(invalid!("pose scale must be positive, got {}", self.scale));
        }
        Ok(())
    }

    pub fn rotation(&self) -> Result<RotationMatrix> {
        rotation_from_angles(self.yaw, self.pitch, self.roll)
    }

    pub fn translation(&self) -> Point3 {
        [self.tx, self.ty, self.tz]
    }

    /// The six values a pose generator predicts: yaw, pitch, roll, tx, ty, tz.
    pub fn to_six(&self) -> [f64; 6] {
        [self.yaw, self.pitch, self.roll, self.tx, self.ty, self.tz]
    }

    pub fn from_six(v: [f64; 6], scale: f64) -> Self {
        HeadPose {
            yaw: v[0],
            pitch: v[1],
            roll: v[2],
            tx: v[3],
            ty: v[4],
            tz: v[5],
            scale,
        }
    }

    pub fn max_abs_angle(&self) -> f64 {
        self.yaw.abs().max(self.pitch.abs()).max(self.roll.abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationMatrix(pub [[f64; 3]; 3]);

impl RotationMatrix {
    pub const IDENTITY: RotationMatrix =
        RotationMatrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn apply(&self, p: &Point3) -> Point3 {
        let m = &self.0;
        [
            m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2],
            m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2],
            m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2],
        ]
    }

    /// Inverse of a rotation.
    pub fn transpose(&self) -> RotationMatrix {
        let m = &self.0;
        let mut t = [[0.0; 3]; 3];
        for (i, row) in t.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = m[j][i];
            }
        }
        RotationMatrix(t)
    }

    pub fn mul(&self, other: &RotationMatrix) -> RotationMatrix {
        let (a, b) = (&self.0, &other.0);
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        RotationMatrix(out)
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// `‖RᵀR − I‖∞` (largest absolute entry).
    pub fn orthonormality_error(&self) -> f64 {
        let p = self.transpose().mul(self);
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((p.0[i][j] - target).abs());
            }
        }
        worst
    }
}

pub fn rotation_from_angles(yaw: f64, pitch: f64, roll: f64) -> Result<RotationMatrix> {
    if !(yaw.is_finite() && pitch.is_finite() && roll.is_finite()) {
        return Err(invalid!("rotation angles must be finite"));
    }
    let (sy, cy) = yaw.to_radians().sin_cos();
    let (sp, cp) = pitch.to_radians().sin_cos();
    let (sr, cr) = roll.to_radians().sin_cos();
    let ry = RotationMatrix([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]]);
    let rx = RotationMatrix([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]]);
    let rz = RotationMatrix([[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]]);
    Ok(rz.mul(&rx).mul(&ry))
}

/// Undoes a head pose: `R⁻¹ · (face − T) / scale`, recentered on the face
/// centroid. Accepts raw detector output or posed frames.
pub fn frontalize(frame: &LandmarkFrame, pose: &HeadPose) -> Result<LandmarkFrame> {
    if !matches!(frame.space, Space::Raw | Space::Posed) {
        return Err(contract!(
            "frontalize expects a raw or posed frame, got {:?}",
            frame.space
        ));
    }
    pose.validate()?;
    let rinv = pose.rotation()?.transpose();
    let t = pose.translation();
    let inv_s = 1.0 / pose.scale;
    let mut face: Vec<Point3> = frame
        .face
        .iter()
        .map(|p| {
            let q = rinv.apply(&[p[0] - t[0], p[1] - t[1], p[2] - t[2]]);
            [q[0] * inv_s, q[1] * inv_s, q[2] * inv_s]
        })
        .collect();
    let c = centroid(&face);
    for p in &mut face {
        for k in 0..3 {
            p[k] -= c[k];
        }
    }
    let (sr, cr) = (-pose.roll).to_radians().sin_cos();
    let eyes = frame
        .eyes
        .iter()
        .map(|e| {
            let (x, y) = (e[0] - t[0], e[1] - t[1]);
            [
                (cr * x - sr * y) * inv_s - c[0],
                (sr * x + cr * y) * inv_s - c[1],
            ]
        })
        .collect();
    LandmarkFrame::new(face, eyes, Space::Frontal)
}

/// Rescales a frontalized frame so the ear landmarks are exactly 2 apart.
/// Returns the frame and the multiplicative factor `2 / ear_distance` applied.
pub fn normalize_scale(frame: &LandmarkFrame) -> Result<(LandmarkFrame, f64)> {
    if !matches!(frame.space, Space::Frontal | Space::FrontalNormalized) {
        return Err(contract!(
            "normalize_scale expects a frontalized frame, got {:?}",
            frame.space
        ));
    }
    let d = frame.ear_distance();
    if d < DEGENERATE_EPS {
        return Err(Error::DegenerateFace(format!(
            "ear landmarks coincide (distance {d:e})"
        )));
    }
    let factor = 2.0 / d;
    let face = frame
        .face
        .iter()
        .map(|p| [p[0] * factor, p[1] * factor, p[2] * factor])
        .collect();
    let eyes = frame
        .eyes
        .iter()
        .map(|e| [e[0] * factor, e[1] * factor])
        .collect();
    let mut out = LandmarkFrame::new_unchecked(face, eyes, Space::FrontalNormalized)?;
    // Division rounding can leave the distance a few ulps off; pin it.
    let d2 = out.ear_distance();
    if d2 != 2.0 {
        let fix = 2.0 / d2;
        out.face.iter_mut().flatten().for_each(|v| *v *= fix);
        out.eyes.iter_mut().flatten().for_each(|v| *v *= fix);
    }
    Ok((LandmarkFrame::new(out.face, out.eyes, Space::FrontalNormalized)?, factor))
}

/// Places a normalized frame into a head pose: `R · (scale · face) + T`.
pub fn apply_pose(frame: &LandmarkFrame, pose: &HeadPose) -> Result<LandmarkFrame> {
    if frame.space != Space::FrontalNormalized {
        return Err(contract!(
            "apply_pose expects a frontal_normalized frame, got {:?}",
            frame.space
        ));
    }
    pose.validate()?;
    let r = pose.rotation()?;
    let t = pose.translation();
    let s = pose.scale;
    let face = frame
        .face
        .iter()
        .map(|p| {
            let q = r.apply(&[p[0] * s, p[1] * s, p[2] * s]);
            [q[0] + t[0], q[1] + t[1], q[2] + t[2]]
        })
        .collect();
    let (sr, cr) = pose.roll.to_radians().sin_cos();
    let eyes = frame
        .eyes
        .iter()
        .map(|e| {
            let (x, y) = (e[0] * s, e[1] * s);
            [cr * x - sr * y + t[0], sr * x + cr * y + t[1]]
        })
        .collect();
    LandmarkFrame::new(face, eyes, Space::Posed)
}

/// Drops the camera-axis coordinate of every face landmark.
pub fn project_orthographic(frame: &LandmarkFrame) -> Vec<Point2> {
    frame.face.iter().map(|p| [p[0], p[1]]).collect()
}

/// Similarity transform (in the image plane) that puts the left mouth corner
/// at `(-1, 0)` and the right one at `(1, 0)`. Depth is scaled along.
pub fn metric_normalize(frame: &LandmarkFrame) -> Result<LandmarkFrame> {
    let l = frame.face[MOUTH_LEFT];
    let r = frame.face[MOUTH_RIGHT];
    let (dx, dy) = (r[0] - l[0], r[1] - l[1]);
    let width = (dx * dx + dy * dy).sqrt();
    if width < DEGENERATE_EPS {
        return Err(Error::DegenerateFace(format!(
            "mouth corners coincide (distance {width:e})"
        )));
    }
    let mid = [(l[0] + r[0]) / 2.0, (l[1] + r[1]) / 2.0, (l[2] + r[2]) / 2.0];
    let k = 2.0 / width;
    let (cos, sin) = (dx / width, dy / width);
    // rotate by -theta where (cos, sin) is the corner direction
    let map2 = |x: f64, y: f64| {
        let (x, y) = (x - mid[0], y - mid[1]);
        [k * (cos * x + sin * y), k * (-sin * x + cos * y)]
    };
    let mut face: Vec<Point3> = frame
        .face
        .iter()
        .map(|p| {
            let [x, y] = map2(p[0], p[1]);
            [x, y, k * (p[2] - mid[2])]
        })
        .collect();
    let eyes = frame.eyes.iter().map(|e| map2(e[0], e[1])).collect();
    // Anchors are exact by definition; pin them against rounding.
    face[MOUTH_LEFT][0] = -1.0;
    face[MOUTH_LEFT][1] = 0.0;
    face[MOUTH_RIGHT][0] = 1.0;
    face[MOUTH_RIGHT][1] = 0.0;
    LandmarkFrame::new(face, eyes, Space::Metric)
}

pub fn centroid(points: &[Point3]) -> Point3 {
    let n = points.len() as f64;
    let mut c = [0.0; 3];
    for p in points {
        for k in 0..3 {
            c[k] += p[k];
        }
    }
    [c[0] / n, c[1] / n, c[2] / n]
}

pub fn dist3(a: &Point3, b: &Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub fn dist2(a: &Point2, b: &Point2) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}
