//! Deterministic stand-in for a language model.
//!
//! Scores an order by its value net of travel, nudged by the rider's emotion,
//! and compares against a threshold that depends on diligence.

use super::decide::{BackendError, DecisionBackend};
use super::{Answer, DecisionQuestion, DecisionResponse};
use crate::types::{DiligenceLevel, EmotionLabel};

/// Below this stamina every order is declined.
pub const STAMINA_GUARD: f64 = 20.0;
const DISTANCE_COST: f64 = 0.1;

pub fn emotion_bias(emotion: Option<EmotionLabel>) -> f64 {
    match emotion {
        None | Some(EmotionLabel::Neutral) => 0.0,
        Some(EmotionLabel::Happiness | EmotionLabel::Surprise) => 5.0,
        Some(EmotionLabel::Sadness | EmotionLabel::Fear) => -3.0,
        Some(EmotionLabel::Anger | EmotionLabel::Disgust) => -6.0,
    }
}

fn threshold(d: DiligenceLevel) -> f64 {
    match d {
        DiligenceLevel::Lazy => 8.0,
        DiligenceLevel::Average => 4.0,
        DiligenceLevel::VeryDiligent => 0.0,
    }
}

pub fn rule_based_policy(q: &DecisionQuestion) -> DecisionResponse {
    let a = &q.agent;
    let (answer, reason) = if a.held >= a.max_held {
        (Answer::Reject, format!("already holding {}/{} orders", a.held, a.max_held))
    } else if a.stamina < STAMINA_GUARD {
        (
            Answer::Reject,
            format!("stamina {:.1} is below {STAMINA_GUARD}", a.stamina),
        )
    } else {
        let bias = emotion_bias(a.emotion);
        let cost = DISTANCE_COST * f64::from(q.total_distance());
        let score = q.order.value - cost + bias;
        let limit = threshold(a.diligence);
        let answer = if score > limit { Answer::Accept } else { Answer::Reject };
        let mood = a.emotion.map_or(String::new(), |e| format!(" ({e})"));
        (
            answer,
            format!(
                "value {:.2} - travel {cost:.2} + bias {bias:+.1}{mood} = {score:.2} against threshold {limit:.1}",
                q.order.value
            ),
        )
    };
    DecisionResponse {
        answer,
        reason,
        backend_id: "rule".into(),
        latency: Default::default(),
    }
}

/// Renders [`rule_based_policy`] in the `ANSWER:` / `REASON:` reply format.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBackend;

impl DecisionBackend for RuleBackend {
    fn backend_id(&self) -> String {
        "rule".into()
    }

    fn complete(&mut self, _prompt: &str, q: &DecisionQuestion) -> Result<String, BackendError> {
        let r = rule_based_policy(q);
        Ok(format!("ANSWER: {}\nREASON: {}", r.answer, r.reason))
    }
}
