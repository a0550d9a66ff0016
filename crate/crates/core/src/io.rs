//! Line-delimited JSON formats for landmark, pose and latent-keypoint
//! sequences, plus atomic file writes.
//!
//! Landmark sequence, one object per line:
//! `{"frame": 0, "space": "frontal_normalized", "face": [[x, y, z]; 68],
//!   "eyes": [[x, y]; 52], "pose": {"yaw": .., "pitch": .., "roll": ..,
//!   "tx": .., "ty": .., "tz": .., "scale": ..} | null}`
//!
//! Pose sequence: `{"frame": 0, "yaw": .., "pitch": .., "roll": .., "tx": ..,
//! "ty": .., "tz": .., "scale": ..}`.
//!
//! Latent keypoints: `{"frame": 0, "kp": [[x, y, z]; 20]}`.
//!
//! Angles are degrees. A missing face point may be written as `null`
//! coordinates, which read back as NaN.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HeadPose, LandmarkFrame, Point2, Point3, Space};
use crate::synthdata::LatentKeypoints;

#[derive(Serialize, Deserialize)]
struct LandmarkRecord {
    frame: usize,
    space: Space,
    face: Vec<[Option<f64>; 3]>,
    eyes: Vec<[Option<f64>; 2]>,
    #[serde(default)]
    pose: Option<HeadPose>,
}

#[derive(Serialize, Deserialize)]
struct PoseRecord {
    frame: usize,
    #[serde(flatten)]
    pose: HeadPose,
}

#[derive(Serialize, Deserialize)]
struct LatentRecord {
    frame: usize,
    kp: Vec<[f64; 3]>,
}

fn opt(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Writes `contents` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let tmp = tmp_path(path);
    {
        let mut f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(contents).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, &r).map_err(|e| Error::parse(path, e))?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::parse(path, e))?;
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::parse(path, e))
}

/// Writes a landmark sequence; `poses`, when given, must match its length.
pub fn write_landmarks(
    path: &Path,
    frames: &[LandmarkFrame],
    poses: Option<&[HeadPose]>,
) -> Result<()> {
    if let Some(p) = poses {
        if p.len() != frames.len() {
            return Err(crate::error::contract!(
                "{} poses for {} landmark frames",
                p.len(),
                frames.len()
            ));
        }
    }
    let records = frames.iter().enumerate().map(|(t, f)| LandmarkRecord {
        frame: t,
        space: f.space(),
        face: f.face().iter().map(|p| p.map(opt)).collect(),
        eyes: f.eyes().iter().map(|p| p.map(opt)).collect(),
        pose: poses.map(|p| p[t]),
    });
    write_jsonl(path, records)
}

/// Reads a landmark sequence. Frames may contain missing (NaN) points; use
/// [`LandmarkFrame::is_finite`] or the corpus filters to reject them.
pub fn read_landmarks(path: &Path) -> Result<(Vec<LandmarkFrame>, Vec<Option<HeadPose>>)> {
    let recs: Vec<LandmarkRecord> = read_jsonl(path)?;
    let mut frames = Vec::with_capacity(recs.len());
    let mut poses = Vec::with_capacity(recs.len());
    for (i, r) in recs.into_iter().enumerate() {
        if r.frame != i {
            return Err(Error::parse(path, format!("frame index {} at line {}", r.frame, i + 1)));
        }
        let face: Vec<Point3> = r.face.iter().map(|p| p.map(|v| v.unwrap_or(f64::NAN))).collect();
        let eyes: Vec<Point2> = r.eyes.iter().map(|p| p.map(|v| v.unwrap_or(f64::NAN))).collect();
        let frame = if face.iter().flatten().chain(eyes.iter().flatten()).all(|v| v.is_finite()) {
            LandmarkFrame::new(face, eyes, r.space)
        } else {
            LandmarkFrame::new_unchecked(face, eyes, r.space)
        }
        .map_err(|e| Error::parse(path, format!("frame {i}: {e}")))?;
        frames.push(frame);
        poses.push(r.pose);
    }
    Ok((frames, poses))
}

pub fn write_poses(path: &Path, poses: &[HeadPose]) -> Result<()> {
    write_jsonl(
        path,
        poses.iter().enumerate().map(|(t, p)| PoseRecord { frame: t, pose: *p }),
    )
}

pub fn read_poses(path: &Path) -> Result<Vec<HeadPose>> {
    let recs: Vec<PoseRecord> = read_jsonl(path)?;
    recs.into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.pose
                .validate()
                .map_err(|e| Error::parse(path, format!("frame {i}: {e}")))?;
            Ok(r.pose)
        })
        .collect()
}

pub fn write_latents(path: &Path, kps: &[LatentKeypoints]) -> Result<()> {
    write_jsonl(
        path,
        kps.iter().enumerate().map(|(t, k)| LatentRecord {
            frame: t,
            kp: k.points().to_vec(),
        }),
    )
}

pub fn read_latents(path: &Path) -> Result<Vec<LatentKeypoints>> {
    let recs: Vec<LatentRecord> = read_jsonl(path)?;
    recs.into_iter()
        .enumerate()
        .map(|(i, r)| {
            LatentKeypoints::new(r.kp).map_err(|e| Error::parse(path, format!("frame {i}: {e}")))
        })
        .collect()
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

