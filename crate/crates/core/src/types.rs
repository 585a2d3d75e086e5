//! Shared value types: emotional state, discrete emotions, rider diligence
//! and the decision framework variant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValueError {
    #[error("non-finite value {0} cannot be clamped")]
    NonFinite(f64),
    #[error("unknown {kind} `{value}`")]
    UnknownLabel { kind: &'static str, value: String },
}

/// Clamps `v` into `[-1, 1]`. Rejects NaN and infinities.
pub fn clamp_unit(v: f64) -> Result<f64, ValueError> {
    if !v.is_finite() {
        return Err(ValueError::NonFinite(v));
    }
    Ok(v.clamp(-1.0, 1.0))
}

/// A point in pleasure/arousal/dominance space.
///
/// Every constructor and update path keeps each component inside `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PadState {
    pub pleasure: f64,
    pub arousal: f64,
    pub dominance: f64,
}

impl PadState {
    pub const NEUTRAL: PadState = PadState {
        pleasure: 0.0,
        arousal: 0.0,
        dominance: 0.0,
    };

    /// Builds a state, clamping each component.
    pub fn new(pleasure: f64, arousal: f64, dominance: f64) -> Result<Self, ValueError> {
        Ok(Self {
            pleasure: clamp_unit(pleasure)?,
            arousal: clamp_unit(arousal)?,
            dominance: clamp_unit(dominance)?,
        })
    }

    pub fn is_in_range(&self) -> bool {
        [self.pleasure, self.arousal, self.dominance]
            .iter()
            .all(|v| (-1.0..=1.0).contains(v))
    }

    pub fn distance(&self, other: &PadState) -> f64 {
        let dp = self.pleasure - other.pleasure;
        let da = self.arousal - other.arousal;
        let dd = self.dominance - other.dominance;
        (dp * dp + da * da + dd * dd).sqrt()
    }
}

/// The seven discrete emotions. Declaration order is the tie-break order
/// used by classification and the row order of every histogram.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum EmotionLabel {
    Anger,
    Disgust,
    Fear,
    Happiness,
    Neutral,
    Sadness,
    Surprise,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 7] = [
        EmotionLabel::Anger,
        EmotionLabel::Disgust,
        EmotionLabel::Fear,
        EmotionLabel::Happiness,
        EmotionLabel::Neutral,
        EmotionLabel::Sadness,
        EmotionLabel::Surprise,
    ];

    /// Emotions that have a role corpus (everything but Neutral).
    pub const CORPUS: [EmotionLabel; 6] = [
        EmotionLabel::Anger,
        EmotionLabel::Disgust,
        EmotionLabel::Fear,
        EmotionLabel::Happiness,
        EmotionLabel::Sadness,
        EmotionLabel::Surprise,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EmotionLabel::Anger => "Anger",
            EmotionLabel::Disgust => "Disgust",
            EmotionLabel::Fear => "Fear",
            EmotionLabel::Happiness => "Happiness",
            EmotionLabel::Neutral => "Neutral",
            EmotionLabel::Sadness => "Sadness",
            EmotionLabel::Surprise => "Surprise",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmotionLabel {
    type Err = ValueError;

    /// Case-insensitive; accepts a few common adjective forms used by
    /// emotion datasets ("happy", "angry", ...).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let label = match s.trim().to_ascii_lowercase().as_str() {
            "anger" | "angry" => EmotionLabel::Anger,
            "disgust" | "disgusted" => EmotionLabel::Disgust,
            "fear" | "afraid" | "scared" => EmotionLabel::Fear,
            "happiness" | "happy" | "joy" => EmotionLabel::Happiness,
            "neutral" => EmotionLabel::Neutral,
            "sadness" | "sad" => EmotionLabel::Sadness,
            "surprise" | "surprised" => EmotionLabel::Surprise,
            _ => {
                return Err(ValueError::UnknownLabel {
                    kind: "emotion",
                    value: s.to_string(),
                })
            }
        };
        Ok(label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiligenceLevel {
    Lazy,
    Average,
    VeryDiligent,
}

impl DiligenceLevel {
    pub const ALL: [DiligenceLevel; 3] = [
        DiligenceLevel::Lazy,
        DiligenceLevel::Average,
        DiligenceLevel::VeryDiligent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DiligenceLevel::Lazy => "Lazy",
            DiligenceLevel::Average => "Average",
            DiligenceLevel::VeryDiligent => "VeryDiligent",
        }
    }
}

impl fmt::Display for DiligenceLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which decision framework drives the rider agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FrameworkVariant {
    /// Plain model decision, no emotion.
    Traditional,
    /// Emotion in the prompt plus step-by-step reasoning, no explanations or memory.
    EmotionPerceived,
    /// Emotion, role examples, explanation memory and step-by-step reasoning.
    EmotionAligned,
}

impl FrameworkVariant {
    pub const ALL: [FrameworkVariant; 3] = [
        FrameworkVariant::Traditional,
        FrameworkVariant::EmotionPerceived,
        FrameworkVariant::EmotionAligned,
    ];

    pub fn perceives_emotion(self) -> bool {
        !matches!(self, FrameworkVariant::Traditional)
    }

    pub fn self_explains(self) -> bool {
        matches!(self, FrameworkVariant::EmotionAligned)
    }

    /// Kebab-case name used on the command line and in run ids.
    pub fn slug(self) -> &'static str {
        match self {
            FrameworkVariant::Traditional => "traditional",
            FrameworkVariant::EmotionPerceived => "emotion-perceived",
            FrameworkVariant::EmotionAligned => "emotion-aligned",
        }
    }
}

impl fmt::Display for FrameworkVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for FrameworkVariant {
    type Err = ValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "traditional" => Ok(FrameworkVariant::Traditional),
            "emotion-perceived" | "emotionperceived" | "perceived" => {
                Ok(FrameworkVariant::EmotionPerceived)
            }
            "emotion-aligned" | "emotionaligned" | "aligned" | "emotion-alignment" => {
                Ok(FrameworkVariant::EmotionAligned)
            }
            _ => Err(ValueError::UnknownLabel {
                kind: "framework variant",
                value: s.to_string(),
            }),
        }
    }
}
