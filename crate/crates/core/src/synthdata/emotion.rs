use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const NUM_EMOTIONS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emotion {
    Neutral,
    Happy,
    Sad,
    Angry,
    Fear,
    Surprise,
    Disgust,
    Contempt,
}

impl Emotion {
    pub const ALL: [Emotion; NUM_EMOTIONS] = [
        Emotion::Neutral,
        Emotion::Happy,
        Emotion::Sad,
        Emotion::Angry,
        Emotion::Fear,
        Emotion::Surprise,
        Emotion::Disgust,
        Emotion::Contempt,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Neutral => "neutral",
            Emotion::Happy => "happy",
            Emotion::Sad => "sad",
            Emotion::Angry => "angry",
            Emotion::Fear => "fear",
            Emotion::Surprise => "surprise",
            Emotion::Disgust => "disgust",
            Emotion::Contempt => "contempt",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Emotion::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid!("unknown emotion {s:?}"))
    }
}

/// Mixture of emotion labels, one nonnegative weight per label. The weight of
/// a label is its intensity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; NUM_EMOTIONS]", into = "[f64; NUM_EMOTIONS]")]
pub struct EmotionVector {
    weights: [f64; NUM_EMOTIONS],
}

impl EmotionVector {
    pub fn new(weights: [f64; NUM_EMOTIONS]) -> Result<Self> {
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(invalid!("emotion weights must lie in [0, 1]: {weights:?}"));
        }
        Ok(EmotionVector { weights })
    }

    pub fn neutral() -> Self {
        Self::one_hot(Emotion::Neutral, 1.0).expect("valid")
    }

    /// All-zero vector (no label at any intensity).
    pub fn zero() -> Self {
        EmotionVector {
            weights: [0.0; NUM_EMOTIONS],
        }
    }

    pub fn one_hot(e: Emotion, intensity: f64) -> Result<Self> {
        let mut w = [0.0; NUM_EMOTIONS];
        w[e.index()] = intensity;
        Self::new(w)
    }

    pub fn weights(&self) -> &[f64; NUM_EMOTIONS] {
        &self.weights
    }

    pub fn weight(&self, e: Emotion) -> f64 {
        self.weights[e.index()]
    }

    pub fn magnitude(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// Label with the largest weight.
    pub fn dominant(&self) -> Emotion {
        let mut best = 0;
        for (i, w) in self.weights.iter().enumerate() {
            if *w > self.weights[best] {
                best = i;
            }
        }
        Emotion::ALL[best]
    }
}

impl Default for EmotionVector {
    fn default() -> Self {
        Self::neutral()
    }
}

impl TryFrom<[f64; NUM_EMOTIONS]> for EmotionVector {
    type Error = Error;

    fn try_from(w: [f64; NUM_EMOTIONS]) -> Result<Self> {
        EmotionVector::new(w)
    }
}

impl From<EmotionVector> for [f64; NUM_EMOTIONS] {
    fn from(e: EmotionVector) -> Self {
        e.weights
    }
}
