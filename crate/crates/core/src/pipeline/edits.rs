//! Landmark edits applied between S2L and pose application: blinks and
//! gaze offsets.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::layout::{eye_lid_pairs, iris_points, FACE_LID_PAIRS};
use crate::geometry::LandmarkFrame;
use crate::synthdata::blink_aperture;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Edits {
    /// Blink centres, in frames.
    pub blinks: Vec<usize>,
    /// Frames from fully open to fully open again.
    pub blink_duration: f64,
    /// Offset added to every pupil and iris point, in normalized units.
    pub gaze: [f64; 2],
}

impl Default for Edits {
    fn default() -> Self {
        Edits {
            blinks: Vec::new(),
            blink_duration: 7.0,
            gaze: [0.0, 0.0],
        }
    }
}

impl Edits {
    pub fn is_identity(&self) -> bool {
        self.blinks.is_empty() && self.gaze == [0.0, 0.0]
    }

    pub fn apply(&self, seq: &[LandmarkFrame]) -> Result<Vec<LandmarkFrame>> {
        let seq = blink_inject(seq, &self.blinks, self.blink_duration)?;
        gaze_offset(&seq, self.gaze)
    }
}

/// Pulls each upper/lower lid pair towards its midpoint by the blink
/// aperture, which dips linearly to 0 at each event centre. Overlapping
/// events merge. All other landmarks are untouched.
pub fn blink_inject(seq: &[LandmarkFrame], at_frames: &[usize], duration: f64) -> Result<Vec<LandmarkFrame>> {
    if let Some(t) = at_frames.iter().find(|&&t| t >= seq.len()) {
        return Err(invalid!("blink at frame {t} outside a {}-frame sequence", seq.len()));
    }
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(invalid!("blink duration must be positive, got {duration}"));
    }
    if at_frames.is_empty() {
        return Ok(seq.to_vec());
    }
    let centers: Vec<f64> = at_frames.iter().map(|&t| t as f64).collect();
    seq.iter()
        .enumerate()
        .map(|(t, frame)| {
            let a = blink_aperture(t, &centers, duration);
            if a >= 1.0 {
                return Ok(frame.clone());
            }
            let mut face = frame.face().to_vec();
            let mut eyes = frame.eyes().to_vec();
            for (u, l) in FACE_LID_PAIRS {
                let (pu, pl) = (face[u], face[l]);
                for k in 0..3 {
                    let mid = 0.5 * (pu[k] + pl[k]);
                    face[u][k] = mid + a * (pu[k] - mid);
                    face[l][k] = mid + a * (pl[k] - mid);
                }
            }
            for (u, l) in eye_lid_pairs() {
                let (pu, pl) = (eyes[u], eyes[l]);
                for k in 0..2 {
                    let mid = 0.5 * (pu[k] + pl[k]);
                    eyes[u][k] = mid + a * (pu[k] - mid);
                    eyes[l][k] = mid + a * (pl[k] - mid);
                }
            }
            LandmarkFrame::new(face, eyes, frame.space())
        })
        .collect()
}

/// Shifts pupil and iris points of both eyes by `offset`.
pub fn gaze_offset(seq: &[LandmarkFrame], offset: [f64; 2]) -> Result<Vec<LandmarkFrame>> {
    if offset.iter().any(|v| !v.is_finite()) {
        return Err(invalid!("gaze offset must be finite"));
    }
    if offset == [0.0, 0.0] {
        return Ok(seq.to_vec());
    }
    let iris: Vec<usize> = iris_points().collect();
    seq.iter()
        .map(|f| {
            f.map_points(
                |_, p| p,
                |i, e| if iris.contains(&i) { [e[0] + offset[0], e[1] + offset[1]] } else { e },
            )
        })
        .collect()
}
