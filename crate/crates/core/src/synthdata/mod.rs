//! Procedural corpus: coupled speech-like audio, landmark motion, head pose
//! and emotion, plus the frozen latent-keypoint oracle used as ground truth
//! for the keypoint model.
//!
//! The jaw opening at frame `t` is [`MOUTH_GAIN`] times the audio envelope at
//! frame `t - 1`; blinks are timed events; each emotion adds a fixed sparse
//! offset field scaled by its weight; the head follows a smooth bounded
//! random walk.

mod clip;
mod corpus;
mod emotion;
pub mod face;
mod oracle;

pub use clip::{
    blink_aperture, generate_clip, AnomalyKind, ClipFlags, ClipRecord, ClipSpec, BLINK_FRAMES,
    MAX_CLEAN_ANGLE, MAX_DURATION, MIN_DURATION, MOUTH_GAIN, MOUTH_LAG,
};
pub use corpus::{
    build_corpus, generate_corpus, plan_corpus, read_manifest, write_manifest, Corpus,
    CorpusConfig, ManifestEntry, Split, CORPUS_FILE, MANIFEST_FILE,
};
pub use emotion::{Emotion, EmotionVector, NUM_EMOTIONS};
pub use oracle::{
    latent_oracle, spectral_norm, LatentKeypoints, LatentOracle, KEYPOINT_DIM, NUM_KEYPOINTS,
    ORACLE_HIDDEN,
};
