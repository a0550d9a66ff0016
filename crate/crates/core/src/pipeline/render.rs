//! Rasterizes landmark topology and latent keypoints into square RGB frames
//! and writes them as a numbered PNG sequence with a JSON manifest.
//!
//! The view is fixed: the square `[-VIEW_EXTENT, VIEW_EXTENT]²` of the
//! x/y plane (y up) fills the image, so the same input always lands on the
//! same pixels.

use std::path::{Path, PathBuf};

use image::{ImageFormat, Rgb, RgbImage};
use imageproc::drawing::{draw_cross_mut, draw_filled_circle_mut, draw_line_segment_mut};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audiofeat::VIDEO_FPS;
use crate::error::{contract, invalid, Error, Result};
use crate::geometry::layout::CONTOURS;
use crate::geometry::LandmarkFrame;
use crate::io;
use crate::synthdata::LatentKeypoints;

pub const DEFAULT_SIZE: u32 = 512;
pub const MIN_SIZE: u32 = 64;
pub const VIEW_EXTENT: f64 = 1.6;
pub const RENDER_MANIFEST: &str = "manifest.json";

const BACKGROUND: Rgb<u8> = Rgb([18, 18, 24]);
const CONTOUR: Rgb<u8> = Rgb([235, 235, 235]);
const EYE: Rgb<u8> = Rgb([120, 200, 255]);
const KEYPOINT: Rgb<u8> = Rgb([255, 140, 60]);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderManifest {
    pub size: u32,
    pub fps: f64,
    pub frames: usize,
    /// File names relative to the manifest's directory, in frame order.
    pub files: Vec<PathBuf>,
}

fn to_pixel(size: u32, x: f64, y: f64) -> (f32, f32) {
    let s = size as f64 / (2.0 * VIEW_EXTENT);
    let c = size as f64 / 2.0;
    ((c + x * s) as f32, (c - y * s) as f32)
}

/// One frame with optional landmarks (drawn as topology polylines plus eye
/// points) and optional keypoint markers.
pub fn render_frame(landmarks: Option<&LandmarkFrame>, keypoints: Option<&LatentKeypoints>, size: u32) -> Result<RgbImage> {
    if size < MIN_SIZE {
        return Err(invalid!("render size {size} below {MIN_SIZE}"));
    }
    let mut img = RgbImage::from_pixel(size, size, BACKGROUND);
    if let Some(f) = landmarks {
        let face = f.face();
        for (range, closed) in CONTOURS {
            let pts: Vec<(f32, f32)> = face[range].iter().map(|p| to_pixel(size, p[0], p[1])).collect();
            for w in pts.windows(2) {
                draw_line_segment_mut(&mut img, w[0], w[1], CONTOUR);
            }
            if closed {
                draw_line_segment_mut(&mut img, pts[pts.len() - 1], pts[0], CONTOUR);
            }
        }
        for e in f.eyes() {
            let (x, y) = to_pixel(size, e[0], e[1]);
            draw_filled_circle_mut(&mut img, (x.round() as i32, y.round() as i32), 1, EYE);
        }
    }
    if let Some(k) = keypoints {
        let arm = (size / 128).max(2) as i32;
        for p in k.points() {
            let (x, y) = to_pixel(size, p[0], p[1]);
            let (x, y) = (x.round() as i32, y.round() as i32);
            for d in -arm..=arm {
                draw_cross_mut(&mut img, KEYPOINT, x + d, y);
                draw_cross_mut(&mut img, KEYPOINT, x, y + d);
            }
        }
    }
    Ok(img)
}

/// Renders a sequence; either input may be absent but not both, and when
/// both are given their lengths must match. Frames are rasterized in
/// parallel.
pub fn render(landmarks: Option<&[LandmarkFrame]>, latents: Option<&[LatentKeypoints]>, size: u32) -> Result<Vec<RgbImage>> {
    let n = match (landmarks, latents) {
        (Some(l), Some(k)) if l.len() != k.len() => {
            return Err(contract!("{} landmark frames vs {} keypoint frames", l.len(), k.len()))
        }
        (Some(l), _) => l.len(),
        (None, Some(k)) => k.len(),
        (None, None) => return Err(invalid!("nothing to render")),
    };
    if n == 0 {
        return Err(invalid!("cannot render an empty sequence"));
    }
    if size < MIN_SIZE {
        return Err(invalid!("render size {size} below {MIN_SIZE}"));
    }
    (0..n)
        .into_par_iter()
        .map(|t| render_frame(landmarks.map(|l| &l[t]), latents.map(|k| &k[t]), size))
        .collect()
}

/// Writes `frame_00000.png`, … and `manifest.json` into `dir`.
pub fn write_frames(images: &[RgbImage], dir: &Path) -> Result<RenderManifest> {
    io::create_dir(dir)?;
    let mut files = Vec::with_capacity(images.len());
    for (t, img) in images.iter().enumerate() {
        let name = PathBuf::from(format!("frame_{t:05}.png"));
        let mut bytes = std::io::Cursor::new(Vec::new());
        img.write_to(&mut bytes, ImageFormat::Png).map_err(|e| Error::Image(e.to_string()))?;
        io::write_atomic(&dir.join(&name), bytes.get_ref())?;
        files.push(name);
    }
    let manifest = RenderManifest {
        size: images.first().map_or(0, |i| i.width()),
        fps: VIDEO_FPS,
        frames: images.len(),
        files,
    };
    io::write_json(&dir.join(RENDER_MANIFEST), &manifest)?;
    Ok(manifest)
}
