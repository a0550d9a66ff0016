//! End-to-end orchestration: configuration profiles, corpus generation,
//! filtering, training, inference and rendering.
//!
//! Inference runs S2L on the audio from a frontal-normalized source face,
//! applies optional landmark edits, places every frame in a head pose
//! (generated, transferred from a file, or fixed at the source pose) and
//! runs L2L on the posed landmarks.

mod edits;
pub mod render;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audiofeat::{align_frames, compute_mfcc, read_wav, Waveform, MAX_ALIGN_SLACK};
use crate::error::{contract, invalid, Error, Result};
use crate::filtering::{run_filters, write_filter_outputs, CorpusReport, FilterConfig, FILTERED_MANIFEST_FILE};
use crate::geometry::{apply_pose, frontalize, normalize_scale, HeadPose, LandmarkFrame, Space};
use crate::io;
use crate::models::{AnyModel, L2l, ModelConfig, ModelKind, PoseGen, S2l};
use crate::synthdata::face::{render_frame as synth_face, Expression, Identity};
use crate::synthdata::{
    build_corpus, Corpus, CorpusConfig, Emotion, EmotionVector, LatentKeypoints, LatentOracle, ManifestEntry, Split,
};
use crate::training::{checkpoint_path, load_clips, train_model, Checkpoint, TrainConfig, TrainOutcome};

pub use edits::{blink_inject, gaze_offset, Edits};
pub use render::{render, render_frame, write_frames, RenderManifest, DEFAULT_SIZE};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Desk,
    Paper,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Desk => "desk",
            Profile::Paper => "paper",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            _ => Err(invalid!("unknown profile {s:?}; expected desk or paper")),
        }
    }
}

/// How the head pose of each output frame is obtained.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PoseMode {
    /// Sampled from PoseGen.
    #[default]
    Generated,
    /// Read from a pose file.
    Transfer(PathBuf),
    /// The source pose on every frame.
    Fixed,
}

impl FromStr for PoseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generated" => Ok(PoseMode::Generated),
            "fixed" => Ok(PoseMode::Fixed),
            _ => match s.strip_prefix("transfer:") {
                Some(p) if !p.is_empty() => Ok(PoseMode::Transfer(PathBuf::from(p))),
                _ => Err(invalid!("pose mode {s:?}; expected generated, fixed or transfer:<file>")),
            },
        }
    }
}

impl TryFrom<String> for PoseMode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PoseMode> for String {
    fn from(m: PoseMode) -> String {
        m.to_string()
    }
}

impl fmt::Display for PoseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PoseMode::Generated => f.write_str("generated"),
            PoseMode::Fixed => f.write_str("fixed"),
            PoseMode::Transfer(p) => write!(f, "transfer:{}", p.display()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Paths {
    pub corpus: PathBuf,
    pub checkpoints: PathBuf,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            corpus: PathBuf::from("data/corpus"),
            checkpoints: PathBuf::from("runs/checkpoints"),
            output: PathBuf::from("out"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferConfig {
    /// Landmark file whose first frame is the source face; the neutral
    /// template face when absent.
    pub source: Option<PathBuf>,
    pub audio: Option<PathBuf>,
    pub emotion: Emotion,
    pub intensity: f64,
    pub pose_mode: PoseMode,
    pub render: bool,
    pub render_size: u32,
    pub edits: Edits,
}

impl Default for InferConfig {
    fn default() -> Self {
        InferConfig {
            source: None,
            audio: None,
            emotion: Emotion::Neutral,
            intensity: 1.0,
            pose_mode: PoseMode::Generated,
            render: true,
            render_size: DEFAULT_SIZE,
            edits: Edits::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub split: Split,
    pub max_clips: Option<usize>,
    /// Also score the mean-face and mean-keypoint baselines.
    pub baselines: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            split: Split::Test,
            max_clips: None,
            baselines: true,
        }
    }
}

/// Every setting of a run. Loaded from the profile defaults, then a TOML
/// file, then command-line overrides, each layer overriding the previous.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub profile: Profile,
    /// Seed for training and pose sampling.
    pub seed: u64,
    pub paths: Paths,
    pub corpus: CorpusConfig,
    pub filter: FilterConfig,
    pub models: ModelConfig,
    pub train: TrainConfig,
    pub infer: InferConfig,
    pub eval: EvalConfig,
}

impl PipelineConfig {
    pub fn for_profile(profile: Profile) -> Self {
        let (models, train, corpus) = match profile {
            Profile::Desk => (
                ModelConfig::desk(),
                TrainConfig::desk(),
                CorpusConfig {
                    clips: 250,
                    ..CorpusConfig::default()
                },
            ),
            Profile::Paper => (
                ModelConfig::paper(),
                TrainConfig::paper(),
                CorpusConfig {
                    clips: 5000,
                    min_duration: 3.0,
                    max_duration: 10.0,
                    ..CorpusConfig::default()
                },
            ),
        };
        PipelineConfig {
            profile,
            seed: 0,
            paths: Paths::default(),
            corpus,
            filter: FilterConfig::default(),
            models,
            train,
            infer: InferConfig::default(),
            eval: EvalConfig::default(),
        }
    }

    /// Profile defaults overlaid with the TOML text. The profile comes from
    /// `profile` when given, else from the text, else desk.
    pub fn from_toml(text: &str, profile: Option<Profile>, origin: &Path) -> Result<Self> {
        let file: toml::Table = text.parse().map_err(|e| Error::parse(origin, e))?;
        let profile = match profile {
            Some(p) => p,
            None => match file.get("profile") {
                Some(toml::Value::String(s)) => s.parse()?,
                Some(_) => return Err(Error::parse(origin, "profile must be a string")),
                None => Profile::Desk,
            },
        };
        let mut base = toml::Table::try_from(Self::for_profile(profile)).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut base, file);
        base.insert("profile".into(), toml::Value::String(profile.name().into()));
        let cfg: PipelineConfig = base.clone().try_into().map_err(|e| Error::parse(origin, e))?;
        let round = toml::Table::try_from(&cfg).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(key) = unknown_key(&base, &round, "") {
            return Err(Error::parse(origin, format!("unknown setting {key}")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` when given; profile defaults otherwise.
    pub fn load(path: Option<&Path>, profile: Option<Profile>) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Self::from_toml(&text, profile, p)
            }
            None => {
                let cfg = Self::for_profile(profile.unwrap_or_default());
                cfg.validate()?;
                Ok(cfg)
            }
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.corpus.validate()?;
        self.models.validate()?;
        self.train_config().validate()?;
        if !(0.0..=1.0).contains(&self.infer.intensity) {
            return Err(Error::Config(format!("intensity {} outside [0, 1]", self.infer.intensity)));
        }
        if self.infer.render_size < render::MIN_SIZE {
            return Err(Error::Config(format!("render size {} below {}", self.infer.render_size, render::MIN_SIZE)));
        }
        Ok(())
    }

    /// Training settings with the run seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn emotion(&self) -> Result<EmotionVector> {
        EmotionVector::one_hot(self.infer.emotion, self.infer.intensity)
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn unknown_key(given: &toml::Table, known: &toml::Table, prefix: &str) -> Option<String> {
    for (k, v) in given {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match (v, known.get(k)) {
            (_, None) => return Some(path),
            (toml::Value::Table(g), Some(toml::Value::Table(n))) => {
                if let Some(p) = unknown_key(g, n, &path) {
                    return Some(p);
                }
            }
            _ => {}
        }
    }
    None
}

/// The pose source of a resolved request.
#[derive(Clone, Debug, PartialEq)]
pub enum PoseSource {
    Generated,
    Transfer(Vec<HeadPose>),
    Fixed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InferenceRequest {
    /// Frontal-normalized source face.
    pub source: LandmarkFrame,
    /// Pose of the source image; its scale is kept by generated poses and
    /// it is used on every frame in fixed mode.
    pub source_pose: HeadPose,
    pub source_kp: LatentKeypoints,
    pub audio: Waveform,
    pub pose: PoseSource,
    pub emotion: EmotionVector,
    pub seed: u64,
    pub edits: Edits,
}

impl InferenceRequest {
    /// Request whose source keypoints come from the latent oracle applied
    /// to the posed source face.
    pub fn new(
        source: LandmarkFrame,
        source_pose: HeadPose,
        audio: Waveform,
        pose: PoseSource,
        emotion: EmotionVector,
        seed: u64,
        oracle: &LatentOracle,
    ) -> Result<Self> {
        if source.space() != Space::FrontalNormalized {
            return Err(contract!("source face must be frontal_normalized, got {:?}", source.space()));
        }
        let source_kp = oracle.apply(&apply_pose(&source, &source_pose)?)?;
        Ok(InferenceRequest {
            source,
            source_pose,
            source_kp,
            audio,
            pose,
            emotion,
            seed,
            edits: Edits::default(),
        })
    }
}

/// Neutral mouth-closed face of the template identity.
pub fn template_source() -> Result<LandmarkFrame> {
    synth_face(&Identity::template(), &Expression::REST, &[[0.0; 3]; crate::geometry::layout::FACE_POINTS])
}

/// First frame of a landmark file as a frontal-normalized source face and
/// its pose. Posed or raw frames need a pose in the file.
pub fn read_source(path: &Path) -> Result<(LandmarkFrame, HeadPose)> {
    let (frames, poses) = io::read_landmarks(path)?;
    let frame = frames.into_iter().next().ok_or_else(|| Error::parse(path, "no landmark frames"))?;
    let pose = poses.into_iter().next().flatten();
    let source = match frame.space() {
        Space::FrontalNormalized => frame,
        Space::Frontal => normalize_scale(&frame)?.0,
        Space::Raw | Space::Posed => {
            let p = pose.ok_or_else(|| Error::parse(path, "posed source frame without a pose"))?;
            normalize_scale(&frontalize(&frame, &p)?)?.0
        }
        Space::Metric => return Err(contract!("source frame in metric space cannot be frontalized")),
    };
    Ok((source, pose.unwrap_or(HeadPose::IDENTITY)))
}

/// The three trained models.
#[derive(Clone, Debug)]
pub struct Models {
    pub s2l: S2l,
    pub posegen: Option<PoseGen>,
    pub l2l: L2l,
    /// Architecture, seed and step of each checkpoint.
    pub summary: serde_json::Value,
}

impl Models {
    pub fn from_checkpoints(s2l: Checkpoint, posegen: Option<Checkpoint>, l2l: Checkpoint) -> Result<Self> {
        let describe = |c: &Checkpoint| {
            serde_json::json!({ "config": c.model.config_json(), "seed": c.model_seed, "step": c.step })
        };
        let summary = serde_json::json!({
            "s2l": describe(&s2l),
            "posegen": posegen.as_ref().map(describe),
            "l2l": describe(&l2l),
        });
        let s2l = match s2l.model {
            AnyModel::S2l(m) => m,
            m => return Err(Error::Config(format!("expected an s2l checkpoint, found {}", m.kind()))),
        };
        let posegen = match posegen.map(|c| c.model) {
            None => None,
            Some(AnyModel::PoseGen(m)) => Some(m),
            Some(m) => return Err(Error::Config(format!("expected a posegen checkpoint, found {}", m.kind()))),
        };
        let l2l = match l2l.model {
            AnyModel::L2l(m) => m,
            m => return Err(Error::Config(format!("expected an l2l checkpoint, found {}", m.kind()))),
        };
        Ok(Models {
            s2l,
            posegen,
            l2l,
            summary,
        })
    }

    /// Loads `<dir>/s2l.ckpt`, `<dir>/l2l.ckpt` and, when needed,
    /// `<dir>/posegen.ckpt`.
    pub fn load(dir: &Path, need_posegen: bool) -> Result<Self> {
        let load = |k| Checkpoint::load(&checkpoint_path(dir, k));
        let posegen = if need_posegen { Some(load(ModelKind::PoseGen)?) } else { None };
        Self::from_checkpoints(load(ModelKind::S2l)?, posegen, load(ModelKind::L2l)?)
    }
}

/// Every intermediate sequence of one inference run.
#[derive(Clone, Debug, PartialEq)]
pub struct InferenceOutput {
    /// Raw S2L output, frontal-normalized.
    pub s2l: Vec<LandmarkFrame>,
    /// S2L output after blink and gaze edits.
    pub landmarks: Vec<LandmarkFrame>,
    pub poses: Vec<HeadPose>,
    pub posed: Vec<LandmarkFrame>,
    pub latents: Vec<LatentKeypoints>,
}

/// S2L → edits → pose → L2L.
pub fn infer(req: &InferenceRequest, models: &Models) -> Result<InferenceOutput> {
    let mut features = compute_mfcc(&req.audio)?;
    if features.frames() == 0 {
        return Err(Error::Audio("audio is too short for a single video frame".into()));
    }
    if let PoseSource::Transfer(p) = &req.pose {
        if p.len().abs_diff(features.frames()) > MAX_ALIGN_SLACK {
            return Err(invalid!("pose file has {} frames but the audio has {}", p.len(), features.frames()));
        }
        features = align_frames(&features, p.len())?;
    }
    let steps = features.frames();
    let s2l = models.s2l.rollout(&req.source, &features, &req.emotion, None, None)?;
    let landmarks = req.edits.apply(&s2l)?;
    let poses = match &req.pose {
        PoseSource::Fixed => vec![req.source_pose; steps],
        PoseSource::Transfer(p) => p.clone(),
        PoseSource::Generated => {
            let pg = models
                .posegen
                .as_ref()
                .ok_or_else(|| Error::Config("generated poses need a posegen checkpoint".into()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
            pg.sample(&features, &mut rng, req.source_pose.scale)?.1
        }
    };
    let posed = landmarks.iter().zip(&poses).map(|(f, p)| apply_pose(f, p)).collect::<Result<Vec<_>>>()?;
    let latents = models.l2l.rollout(&posed, &features, &req.source_kp, &req.emotion)?;
    Ok(InferenceOutput {
        s2l,
        landmarks,
        poses,
        posed,
        latents,
    })
}

pub const S2L_FILE: &str = "s2l_landmarks.jsonl";
pub const LANDMARKS_FILE: &str = "landmarks.jsonl";
pub const POSES_FILE: &str = "poses.jsonl";
pub const POSED_FILE: &str = "posed_landmarks.jsonl";
pub const LATENTS_FILE: &str = "latents.jsonl";
pub const FRAMES_DIR: &str = "frames";

/// Writes every intermediate sequence into `dir`.
pub fn write_inference(out: &InferenceOutput, dir: &Path) -> Result<()> {
    io::create_dir(dir)?;
    io::write_landmarks(&dir.join(S2L_FILE), &out.s2l, None)?;
    io::write_landmarks(&dir.join(LANDMARKS_FILE), &out.landmarks, Some(&out.poses))?;
    io::write_poses(&dir.join(POSES_FILE), &out.poses)?;
    io::write_landmarks(&dir.join(POSED_FILE), &out.posed, None)?;
    io::write_latents(&dir.join(LATENTS_FILE), &out.latents)
}

/// Writes the corpus described by `cfg.corpus` under `cfg.paths.corpus`.
pub fn gen_data(cfg: &PipelineConfig) -> Result<Vec<ManifestEntry>> {
    build_corpus(&cfg.corpus, &cfg.paths.corpus)
}

/// Filters the corpus and writes the filtered manifest and report next to
/// the full manifest.
pub fn filter_corpus(cfg: &PipelineConfig) -> Result<CorpusReport> {
    let corpus = Corpus::open(&cfg.paths.corpus)?;
    let (kept, report) = run_filters(&corpus, &cfg.filter)?;
    write_filter_outputs(&cfg.paths.corpus.join(FILTERED_MANIFEST_FILE), &kept, &report)?;
    Ok(report)
}

/// The corpus through its filtered manifest, or the full one (with a
/// warning) when filtering has not run.
pub fn open_corpus(cfg: &PipelineConfig) -> Result<Corpus> {
    let filtered = cfg.paths.corpus.join(FILTERED_MANIFEST_FILE);
    if filtered.exists() {
        Corpus::open_with_manifest(&cfg.paths.corpus, &filtered)
    } else {
        log::warn!("no filtered manifest at {}; using every clip", filtered.display());
        Corpus::open(&cfg.paths.corpus)
    }
}

/// Trains one model on the training split.
pub fn train(cfg: &PipelineConfig, kind: ModelKind) -> Result<TrainOutcome> {
    let corpus = open_corpus(cfg)?;
    let clips = load_clips(&corpus, corpus.split(Split::Train))?;
    log::info!("training {kind} on {} clips", clips.len());
    train_model(
        kind,
        clips,
        &cfg.models,
        &cfg.train_config(),
        &cfg.paths.checkpoints,
        Some(cfg.profile.name()),
    )
}

/// Builds the inference request described by `cfg.infer`.
pub fn request_from_config(cfg: &PipelineConfig) -> Result<InferenceRequest> {
    let ic = &cfg.infer;
    let audio_path = ic.audio.as_ref().ok_or_else(|| Error::Config("no audio file given".into()))?;
    let audio = read_wav(audio_path)?;
    let (source, source_pose) = match &ic.source {
        Some(p) => read_source(p)?,
        None => (template_source()?, HeadPose::IDENTITY),
    };
    let pose = match &ic.pose_mode {
        PoseMode::Generated => PoseSource::Generated,
        PoseMode::Fixed => PoseSource::Fixed,
        PoseMode::Transfer(p) => PoseSource::Transfer(io::read_poses(p)?),
    };
    let oracle = LatentOracle::new(cfg.corpus.oracle_seed);
    let mut req = InferenceRequest::new(source, source_pose, audio, pose, cfg.emotion()?, cfg.seed, &oracle)?;
    req.edits = ic.edits.clone();
    Ok(req)
}

/// Loads checkpoints, runs inference, writes all sequences under
/// `cfg.paths.output` and, when enabled, the rendered frames.
pub fn run_inference(cfg: &PipelineConfig) -> Result<InferenceOutput> {
    let req = request_from_config(cfg)?;
    let models = Models::load(&cfg.paths.checkpoints, req.pose == PoseSource::Generated)?;
    let out = infer(&req, &models)?;
    write_inference(&out, &cfg.paths.output)?;
    if cfg.infer.render {
        let images = render(Some(&out.posed), Some(&out.latents), cfg.infer.render_size)?;
        write_frames(&images, &cfg.paths.output.join(FRAMES_DIR))?;
    }
    Ok(out)
}
