//! Corpus cleaning: temporal jumps, extreme rotations, scale variation,
//! missing detections and a hand-presence flag.
//!
//! Every threshold is a strict upper bound: a value equal to its threshold
//! passes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::layout::FACE_POINTS;
use crate::geometry::{dist3, HeadPose, LandmarkFrame};
use crate::io;
use crate::synthdata::{ClipFlags, ClipRecord, Corpus, ManifestEntry};

pub const FILTERED_MANIFEST_FILE: &str = "manifest.filtered.jsonl";
pub const REPORT_FILE: &str = "filter_report.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub temporal_jump: bool,
    /// Largest allowed mean landmark displacement between adjacent frames,
    /// in frontal-normalized units.
    pub jump_threshold: f64,
    pub rotation: bool,
    pub max_rotation_deg: f64,
    pub scale_variation: bool,
    pub max_scale_ratio: f64,
    pub missing_frames: bool,
    pub hand_presence: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            temporal_jump: true,
            jump_threshold: 0.15,
            rotation: true,
            max_rotation_deg: 45.0,
            scale_variation: true,
            max_scale_ratio: 1.3,
            missing_frames: true,
            hand_presence: true,
        }
    }
}

impl FilterConfig {
    pub fn all_disabled() -> Self {
        FilterConfig {
            temporal_jump: false,
            rotation: false,
            scale_variation: false,
            missing_frames: false,
            hand_presence: false,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    TemporalJump,
    Rotation,
    ScaleVariation,
    MissingFrames,
    HandPresence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Outcome of one filter on one clip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterEntry {
    pub filter: FilterKind,
    pub verdict: Verdict,
    pub offending_frames: Vec<usize>,
    /// Largest jump, largest angle, scale ratio, missing-frame count, or hand flag.
    pub statistic: f64,
}

impl FilterEntry {
    fn new(filter: FilterKind, fail: bool, offending_frames: Vec<usize>, statistic: f64) -> Self {
        FilterEntry {
            filter,
            verdict: if fail { Verdict::Fail } else { Verdict::Pass },
            offending_frames,
            statistic,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub clip_id: String,
    pub entries: Vec<FilterEntry>,
}

impl FilterReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(FilterEntry::passed)
    }

    pub fn verdict(&self, kind: FilterKind) -> Option<Verdict> {
        self.entries.iter().find(|e| e.filter == kind).map(|e| e.verdict)
    }
}

/// Mean over the 68 face points of the 3D displacement between frames `t-1`
/// and `t`, for every `t ≥ 1`.
pub fn frame_displacements(seq: &[LandmarkFrame]) -> Vec<f64> {
    seq.windows(2)
        .map(|w| {
            let s: f64 = w[0]
                .face()
                .iter()
                .zip(w[1].face())
                .map(|(a, b)| dist3(a, b))
                .sum();
            s / FACE_POINTS as f64
        })
        .collect()
}

pub fn filter_temporal_jump(seq: &[LandmarkFrame], threshold: f64) -> Result<FilterEntry> {
    if seq.len() < 2 {
        return Err(invalid!("temporal jump filter needs at least 2 frames, got {}", seq.len()));
    }
    let d = frame_displacements(seq);
    let offending: Vec<usize> = d
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > threshold)
        .map(|(i, _)| i + 1)
        .collect();
    let max = d.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    Ok(FilterEntry::new(FilterKind::TemporalJump, !offending.is_empty(), offending, max))
}

pub fn filter_rotation(poses: &[HeadPose], max_deg: f64) -> Result<FilterEntry> {
    if poses.is_empty() {
        return Err(invalid!("rotation filter needs a nonempty pose sequence"));
    }
    let offending: Vec<usize> = poses
        .iter()
        .enumerate()
        .filter(|(_, p)| p.max_abs_angle() > max_deg)
        .map(|(i, _)| i)
        .collect();
    let max = poses.iter().map(HeadPose::max_abs_angle).fold(0.0, f64::max);
    Ok(FilterEntry::new(FilterKind::Rotation, !offending.is_empty(), offending, max))
}

pub fn filter_scale_variation(poses: &[HeadPose], max_ratio: f64) -> Result<FilterEntry> {
    if poses.is_empty() {
        return Err(invalid!("scale filter needs a nonempty pose sequence"));
    }
    if let Some(p) = poses.iter().position(|p| !(p.scale > 0.0)) {
        return Err(invalid!("nonpositive scale {} at frame {p}", poses[p].scale));
    }
    let (mut lo, mut hi) = (usize::MAX, usize::MAX);
    for (i, p) in poses.iter().enumerate() {
        if lo == usize::MAX || p.scale < poses[lo].scale {
            lo = i;
        }
        if hi == usize::MAX || p.scale > poses[hi].scale {
            hi = i;
        }
    }
    let ratio = poses[hi].scale / poses[lo].scale;
    let fail = ratio > max_ratio;
    let frames = if fail { vec![lo.min(hi), lo.max(hi)] } else { vec![] };
    Ok(FilterEntry::new(FilterKind::ScaleVariation, fail, frames, ratio))
}

/// Fails on an empty sequence or any frame with a non-finite coordinate.
pub fn filter_missing_frames(seq: &[LandmarkFrame]) -> FilterEntry {
    let offending: Vec<usize> = seq
        .iter()
        .enumerate()
        .filter(|(_, f)| !f.is_finite())
        .map(|(i, _)| i)
        .collect();
    let fail = seq.is_empty() || !offending.is_empty();
    let count = offending.len() as f64;
    FilterEntry::new(FilterKind::MissingFrames, fail, offending, count)
}

pub fn filter_hand_presence(flags: &ClipFlags) -> FilterEntry {
    let v = if flags.hand_present { 1.0 } else { 0.0 };
    FilterEntry::new(FilterKind::HandPresence, flags.hand_present, vec![], v)
}

/// Runs every enabled filter on one clip's landmark and pose sequences.
pub fn filter_clip(
    clip_id: &str,
    frames: &[LandmarkFrame],
    poses: &[HeadPose],
    flags: &ClipFlags,
    cfg: &FilterConfig,
) -> Result<FilterReport> {
    let mut entries = Vec::new();
    if cfg.missing_frames {
        let mut e = filter_missing_frames(frames);
        if poses.len() != frames.len() {
            e.verdict = Verdict::Fail;
            e.offending_frames.extend(poses.len().min(frames.len())..poses.len().max(frames.len()));
        }
        entries.push(e);
    }
    if cfg.temporal_jump {
        entries.push(if frames.len() < 2 {
            FilterEntry::new(FilterKind::TemporalJump, true, vec![], f64::NAN)
        } else {
            filter_temporal_jump(frames, cfg.jump_threshold)?
        });
    }
    if cfg.rotation {
        entries.push(if poses.is_empty() {
            FilterEntry::new(FilterKind::Rotation, true, vec![], f64::NAN)
        } else {
            filter_rotation(poses, cfg.max_rotation_deg)?
        });
    }
    if cfg.scale_variation {
        entries.push(match filter_scale_variation(poses, cfg.max_scale_ratio) {
            Ok(e) => e,
            Err(_) => FilterEntry::new(FilterKind::ScaleVariation, true, vec![], f64::NAN),
        });
    }
    if cfg.hand_presence {
        entries.push(filter_hand_presence(flags));
    }
    Ok(FilterReport {
        clip_id: clip_id.to_string(),
        entries,
    })
}

pub fn filter_record(clip: &ClipRecord, cfg: &FilterConfig) -> Result<FilterReport> {
    filter_clip(&clip.id, &clip.frames, &clip.poses, &clip.flags, cfg)
}

/// Aggregate over a corpus run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub config: FilterConfig,
    pub total: usize,
    pub retained: usize,
    pub removed: usize,
    /// Number of clips failing each filter (a clip may fail several).
    pub failures: BTreeMap<FilterKind, usize>,
    pub clips: Vec<FilterReport>,
}

/// Filters every clip listed in `corpus` and returns the surviving manifest
/// entries with a report.
pub fn run_filters(corpus: &Corpus, cfg: &FilterConfig) -> Result<(Vec<ManifestEntry>, CorpusReport)> {
    let mut kept = Vec::new();
    let mut clips = Vec::with_capacity(corpus.entries.len());
    let mut failures = BTreeMap::new();
    for entry in &corpus.entries {
        let (frames, _) = io::read_landmarks(&corpus.root.join(&entry.landmarks))?;
        let poses = io::read_poses(&corpus.root.join(&entry.poses))?;
        let report = filter_clip(&entry.id, &frames, &poses, &entry.flags, cfg)?;
        for e in report.entries.iter().filter(|e| !e.passed()) {
            *failures.entry(e.filter).or_insert(0) += 1;
        }
        if report.passed() {
            kept.push(entry.clone());
        } else {
            log::info!("{} removed by filters", entry.id);
        }
        clips.push(report);
    }
    let report = CorpusReport {
        config: cfg.clone(),
        total: corpus.entries.len(),
        retained: kept.len(),
        removed: corpus.entries.len() - kept.len(),
        failures,
        clips,
    };
    Ok((kept, report))
}

/// Writes the filtered manifest to `manifest_out` and the report next to it.
pub fn write_filter_outputs(
    manifest_out: &Path,
    kept: &[ManifestEntry],
    report: &CorpusReport,
) -> Result<()> {
    crate::synthdata::write_manifest(manifest_out, kept)?;
    let report_path = manifest_out.with_file_name(REPORT_FILE);
    io::write_json(&report_path, report)
}

#[cfg(test)]
mod tests;
