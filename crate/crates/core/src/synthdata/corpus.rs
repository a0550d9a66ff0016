//! On-disk corpus: a manifest with one JSON line per clip, a corpus header,
//! and one directory per clip holding its waveform and sequence files.
//!
//! ```text
//! <root>/corpus.json            CorpusConfig used to build the corpus
//! <root>/manifest.jsonl         ManifestEntry per clip
//! <root>/clips/<id>/audio.wav
//! <root>/clips/<id>/landmarks.jsonl   frontal-normalized, with poses
//! <root>/clips/<id>/poses.jsonl
//! <root>/clips/<id>/latents.jsonl
//! <root>/clips/<id>/source.jsonl      neutral source frame (pose = first pose)
//! <root>/clips/<id>/source_kp.jsonl
//! <root>/clips/<id>/controls.json     envelope and jaw-opening signals
//! ```

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::clip::{generate_clip, AnomalyKind, ClipFlags, ClipRecord, ClipSpec};
use super::emotion::{Emotion, EmotionVector};
use crate::audiofeat::{read_wav, write_wav, DEFAULT_SAMPLE_RATE};
use crate::error::{invalid, Error, Result};
use crate::io;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const CORPUS_FILE: &str = "corpus.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub clips: usize,
    /// Train / val / test fractions.
    pub splits: [f64; 3],
    pub seed: u64,
    pub anomaly_rate: f64,
    pub min_duration: f64,
    pub max_duration: f64,
    pub sample_rate: u32,
    pub oracle_seed: u64,
    /// Fraction of clips carrying a non-neutral emotion.
    pub emotion_fraction: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            clips: 200,
            splits: [0.8, 0.1, 0.1],
            seed: 7,
            anomaly_rate: 0.0,
            min_duration: 3.0,
            max_duration: 5.0,
            sample_rate: DEFAULT_SAMPLE_RATE,
            oracle_seed: 1234,
            emotion_fraction: 0.5,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clips == 0 {
            return Err(invalid!("corpus needs at least one clip"));
        }
        let sum: f64 = self.splits.iter().sum();
        if self.splits.iter().any(|s| *s < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(invalid!("split ratios {:?} must be nonnegative and sum to 1", self.splits));
        }
        if !(0.0..=1.0).contains(&self.anomaly_rate) {
            return Err(invalid!("anomaly rate {} outside [0, 1]", self.anomaly_rate));
        }
        if !(0.0..=1.0).contains(&self.emotion_fraction) {
            return Err(invalid!("emotion fraction {} outside [0, 1]", self.emotion_fraction));
        }
        if self.min_duration > self.max_duration {
            return Err(invalid!("min duration exceeds max duration"));
        }
        Ok(())
    }

    /// Clip counts per split: rounded train and val, remainder test.
    pub fn split_counts(&self) -> [usize; 3] {
        let n = self.clips;
        let train = ((self.splits[0] * n as f64).round() as usize).min(n);
        let val = ((self.splits[1] * n as f64).round() as usize).min(n - train);
        [train, val, n - train - val]
    }

    pub fn anomaly_count(&self) -> usize {
        (self.anomaly_rate * self.clips as f64).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub split: Split,
    pub seed: u64,
    pub frames: usize,
    pub emotion: EmotionVector,
    pub flags: ClipFlags,
    /// Paths relative to the corpus root.
    pub audio: PathBuf,
    pub landmarks: PathBuf,
    pub poses: PathBuf,
    pub latents: PathBuf,
    pub source: PathBuf,
    pub source_kp: PathBuf,
    pub controls: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct Controls {
    envelope: Vec<f64>,
    mouth_open: Vec<f64>,
}

fn mix_seed(seed: u64, i: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ i.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-clip settings, split and seed for a corpus, without generating
/// any data.
pub fn plan_corpus(cfg: &CorpusConfig) -> Result<Vec<(String, Split, ClipSpec, u64)>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..cfg.clips).collect();
    order.shuffle(&mut rng);
    let mut anomalies = vec![None; cfg.clips];
    for (k, &i) in order.iter().take(cfg.anomaly_count()).enumerate() {
        anomalies[i] = Some(AnomalyKind::ALL[k % AnomalyKind::ALL.len()]);
    }
    let [train, val, _] = cfg.split_counts();
    (0..cfg.clips)
        .map(|i| {
            let emotion = if rng.gen_bool(cfg.emotion_fraction) {
                let e = Emotion::ALL[rng.gen_range(1..Emotion::ALL.len())];
                EmotionVector::one_hot(e, rng.gen_range(0.0..=1.0))?
            } else {
                EmotionVector::neutral()
            };
            let duration = if cfg.max_duration > cfg.min_duration {
                rng.gen_range(cfg.min_duration..=cfg.max_duration)
            } else {
                cfg.min_duration
            };
            let split = if i < train {
                Split::Train
            } else if i < train + val {
                Split::Val
            } else {
                Split::Test
            };
            let spec = ClipSpec {
                duration_secs: duration,
                emotion,
                silent: false,
                sample_rate: cfg.sample_rate,
                oracle_seed: cfg.oracle_seed,
                anomaly: anomalies[i],
            };
            Ok((format!("clip_{i:05}"), split, spec, mix_seed(cfg.seed, i as u64)))
        })
        .collect()
}

/// Generates every clip of a corpus in memory.
pub fn generate_corpus(cfg: &CorpusConfig) -> Result<Vec<(Split, ClipRecord)>> {
    plan_corpus(cfg)?
        .into_iter()
        .map(|(id, split, spec, seed)| {
            let mut clip = generate_clip(&spec, seed)?;
            clip.id = id;
            Ok((split, clip))
        })
        .collect()
}

/// Generates a corpus and writes it under `root`. Returns the manifest.
pub fn build_corpus(cfg: &CorpusConfig, root: &Path) -> Result<Vec<ManifestEntry>> {
    let plan = plan_corpus(cfg)?;
    io::create_dir(root)?;
    let mut entries = Vec::with_capacity(plan.len());
    for (id, split, spec, seed) in plan {
        let mut clip = generate_clip(&spec, seed)?;
        clip.id = id;
        let entry = write_clip(root, &clip, split, seed)?;
        log::debug!("wrote {}", entry.id);
        entries.push(entry);
    }
    io::write_json(&root.join(CORPUS_FILE), cfg)?;
    write_manifest(&root.join(MANIFEST_FILE), &entries)?;
    Ok(entries)
}

fn write_clip(root: &Path, clip: &ClipRecord, split: Split, seed: u64) -> Result<ManifestEntry> {
    let rel = PathBuf::from("clips").join(&clip.id);
    let dir = root.join(&rel);
    io::create_dir(&dir)?;
    let entry = ManifestEntry {
        id: clip.id.clone(),
        split,
        seed,
        frames: clip.len(),
        emotion: clip.emotion,
        flags: clip.flags.clone(),
        audio: rel.join("audio.wav"),
        landmarks: rel.join("landmarks.jsonl"),
        poses: rel.join("poses.jsonl"),
        latents: rel.join("latents.jsonl"),
        source: rel.join("source.jsonl"),
        source_kp: rel.join("source_kp.jsonl"),
        controls: rel.join("controls.json"),
    };
    write_wav(&root.join(&entry.audio), &clip.waveform)?;
    io::write_landmarks(&root.join(&entry.landmarks), &clip.frames, Some(&clip.poses))?;
    io::write_poses(&root.join(&entry.poses), &clip.poses)?;
    io::write_latents(&root.join(&entry.latents), &clip.latents)?;
    io::write_landmarks(
        &root.join(&entry.source),
        std::slice::from_ref(&clip.source),
        Some(&clip.poses[..1]),
    )?;
    io::write_latents(&root.join(&entry.source_kp), std::slice::from_ref(&clip.source_kp))?;
    io::write_json(
        &root.join(&entry.controls),
        &Controls {
            envelope: clip.envelope.clone(),
            mouth_open: clip.mouth_open.clone(),
        },
    )?;
    Ok(entry)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    io::write_jsonl(path, entries)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    io::read_jsonl(path)
}

/// A corpus directory opened through one of its manifests.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub root: PathBuf,
    pub config: CorpusConfig,
    pub entries: Vec<ManifestEntry>,
}

impl Corpus {
    pub fn open(root: &Path) -> Result<Self> {
        Self::open_with_manifest(root, &root.join(MANIFEST_FILE))
    }

    pub fn open_with_manifest(root: &Path, manifest: &Path) -> Result<Self> {
        let config = io::read_json(&root.join(CORPUS_FILE))?;
        let entries = read_manifest(manifest)?;
        Ok(Corpus {
            root: root.to_path_buf(),
            config,
            entries,
        })
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn load_clip(&self, entry: &ManifestEntry) -> Result<ClipRecord> {
        let at = |p: &Path| self.root.join(p);
        let waveform = read_wav(&at(&entry.audio))?;
        let (frames, _) = io::read_landmarks(&at(&entry.landmarks))?;
        let poses = io::read_poses(&at(&entry.poses))?;
        let latents = io::read_latents(&at(&entry.latents))?;
        let (mut source, _) = io::read_landmarks(&at(&entry.source))?;
        let mut source_kp = io::read_latents(&at(&entry.source_kp))?;
        let controls: Controls = io::read_json(&at(&entry.controls))?;
        if source.len() != 1 || source_kp.len() != 1 {
            return Err(Error::parse(at(&entry.source), "expected exactly one source frame"));
        }
        let n = frames.len();
        if poses.len() != n || latents.len() != n {
            return Err(Error::parse(
                at(&entry.landmarks),
                format!("sequence lengths differ: {n} / {} / {}", poses.len(), latents.len()),
            ));
        }
        Ok(ClipRecord {
            id: entry.id.clone(),
            waveform,
            frames,
            poses,
            latents,
            emotion: entry.emotion,
            source: source.remove(0),
            source_kp: source_kp.remove(0),
            fps: crate::audiofeat::VIDEO_FPS,
            flags: entry.flags.clone(),
            envelope: controls.envelope,
            mouth_open: controls.mouth_open,
        })
    }
}
