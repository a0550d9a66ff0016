//! Index conventions for the 68-point face layout (iBUG 300-W ordering) and
//! the 52-point eye layout.
//!
//! The "ear" landmarks used for scale normalization are the two ends of the
//! jaw contour, indices 0 and 16. The mouth corners used by the metric frame
//! are 48 (left) and 54 (right).

use std::ops::Range;

pub const FACE_POINTS: usize = 68;
pub const EYE_POINTS: usize = 52;
/// Flattened face coordinates (68 × 3).
pub const FACE_DIM: usize = FACE_POINTS * 3;
/// Flattened eye coordinates (52 × 2).
pub const EYE_DIM: usize = EYE_POINTS * 2;

pub const EAR_LEFT: usize = 0;
pub const EAR_RIGHT: usize = 16;
pub const MOUTH_LEFT: usize = 48;
pub const MOUTH_RIGHT: usize = 54;
pub const NOSE_TIP: usize = 30;

pub const JAW: Range<usize> = 0..17;
pub const BROW_LEFT: Range<usize> = 17..22;
pub const BROW_RIGHT: Range<usize> = 22..27;
pub const NOSE_BRIDGE: Range<usize> = 27..31;
pub const NOSE_BOTTOM: Range<usize> = 31..36;
pub const EYE_LEFT: Range<usize> = 36..42;
pub const EYE_RIGHT: Range<usize> = 42..48;
pub const MOUTH_OUTER: Range<usize> = 48..60;
pub const MOUTH_INNER: Range<usize> = 60..68;
/// Mouth landmarks used by the mouth metrics (20 points).
pub const MOUTH: Range<usize> = 48..68;

/// Upper/lower eyelid pairs of the 68-point layout.
pub const FACE_LID_PAIRS: [(usize, usize); 4] = [(37, 41), (38, 40), (43, 47), (44, 46)];

/// Points per eye in the 52-point layout: 10 upper lid, 10 lower lid,
/// pupil centre, 5 iris ring points.
pub const EYE_BLOCK: usize = 26;
pub const LID_POINTS: usize = 10;

/// Upper/lower lid pairs of the 52-point eye layout, both eyes.
pub fn eye_lid_pairs() -> impl Iterator<Item = (usize, usize)> {
    (0..2).flat_map(|eye| {
        let base = eye * EYE_BLOCK;
        (0..LID_POINTS).map(move |k| (base + k, base + LID_POINTS + k))
    })
}

/// Pupil and iris indices of the 52-point layout, both eyes.
pub fn iris_points() -> impl Iterator<Item = usize> {
    (0..2).flat_map(|eye| {
        let base = eye * EYE_BLOCK + 2 * LID_POINTS;
        base..base + (EYE_BLOCK - 2 * LID_POINTS)
    })
}

/// Polylines of the face topology, used for rendering. The flag marks closed loops.
pub const CONTOURS: [(Range<usize>, bool); 9] = [
    (JAW, false),
    (BROW_LEFT, false),
    (BROW_RIGHT, false),
    (NOSE_BRIDGE, false),
    (NOSE_BOTTOM, false),
    (EYE_LEFT, true),
    (EYE_RIGHT, true),
    (MOUTH_OUTER, true),
    (MOUTH_INNER, true),
];
