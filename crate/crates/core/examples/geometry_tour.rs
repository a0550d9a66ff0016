//! Walks one synthetic frame through every landmark space: posed camera
//! coordinates, frontalized, scale-normalized and the metric mouth frame.
//!
//! `cargo run --release --example geometry_tour`

use anyhow::Result;
use speechface::geometry::layout::{MOUTH_LEFT, MOUTH_RIGHT, NOSE_TIP};
use speechface::geometry::{apply_pose, frontalize, metric_normalize, normalize_scale, HeadPose, LandmarkFrame};
use speechface::synthdata::{generate_clip, ClipSpec};

fn describe(label: &str, f: &LandmarkFrame) {
    let (l, r, n) = (f.face()[MOUTH_LEFT], f.face()[MOUTH_RIGHT], f.face()[NOSE_TIP]);
    println!(
        "{label:<18} {:?}  ear distance {:.6}  mouth corners ({:+.4}, {:+.4}) ({:+.4}, {:+.4})  nose tip z {:+.4}",
        f.space(),
        f.ear_distance(),
        l[0],
        l[1],
        r[0],
        r[1],
        n[2]
    );
}

fn main() -> Result<()> {
    let clip = generate_clip(&ClipSpec { duration_secs: 1.0, ..ClipSpec::default() }, 3)?;
    let face = &clip.frames[12];
    describe("frontal normalized", face);

    let pose = HeadPose { yaw: 20.0, pitch: -8.0, roll: 5.0, tx: 0.1, ty: -0.05, tz: 0.0, scale: 1.4 };
    let r = pose.rotation()?;
    println!("rotation for {pose:?}: det {:.12}, orthonormality error {:.2e}", r.determinant(), r.orthonormality_error());
    let posed = apply_pose(face, &pose)?;
    describe("posed", &posed);

    let frontal = frontalize(&posed, &pose)?;
    describe("frontalized", &frontal);
    let (normalized, factor) = normalize_scale(&frontal)?;
    describe("renormalized", &normalized);
    println!("scale factor {factor:.6}");

    let worst = normalized
        .face()
        .iter()
        .flatten()
        .zip(face.face().iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("round-trip error {worst:.2e}");
    describe("metric", &metric_normalize(&posed)?);
    Ok(())
}
