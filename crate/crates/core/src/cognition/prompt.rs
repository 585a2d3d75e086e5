use std::fmt::Write as _;

use super::{DecisionQuestion, MemoryRecord};
use crate::types::{DiligenceLevel, FrameworkVariant};

/// Chain-of-thought cue used by the emotion-aware variants.
pub const COT_CUE: &str = "Let's think step by step.";

/// Words that must never reach a prompt for the emotion-blind variant.
pub const EMOTION_TOKENS: &[&str] = &[
    "emotion",
    "feel",
    "mood",
    "pleasure",
    "arousal",
    "dominance",
    "pad",
    "anger",
    "disgust",
    "fear",
    "happiness",
    "neutral",
    "sadness",
    "surprise",
];

const EXPLAIN_INSTRUCTION: &str = "Reply in exactly this form:\nANSWER: <Accept|Reject>\nREASON: <text>";
const ANSWER_ONLY_INSTRUCTION: &str = "Finish with a single line in this form:\nANSWER: <Accept|Reject>";

fn diligence_phrase(d: DiligenceLevel) -> &'static str {
    match d {
        DiligenceLevel::Lazy => "you prefer an easy pace and only take orders that are clearly worth it",
        DiligenceLevel::Average => "you work a normal pace",
        DiligenceLevel::VeryDiligent => "you work hard and rarely turn an order down",
    }
}

/// Renders the prompt for one decision.
///
/// Sections always appear in this order: role examples, rider state,
/// memories, the question, the output instruction. Sections a variant does
/// not use are omitted entirely.
pub fn build_prompt(
    q: &DecisionQuestion,
    examples: &[String],
    memories: &[MemoryRecord],
    variant: FrameworkVariant,
) -> String {
    let a = &q.agent;
    let perceives = variant.perceives_emotion();
    let mut p = String::new();
    p.push_str("You are a food-delivery rider on an online delivery platform.\n");

    if perceives && !examples.is_empty() {
        if let Some(e) = a.emotion {
            let _ = writeln!(p, "\n## How riders in a state of {e} talk");
            for (i, ex) in examples.iter().enumerate() {
                let _ = writeln!(p, "{}. {}", i + 1, ex.trim());
            }
        }
    }

    p.push_str("\n## Your situation\n");
    let _ = writeln!(p, "- Stamina: {:.1} / 100", a.stamina);
    let _ = writeln!(p, "- Income so far: {:.2}", a.income);
    let _ = writeln!(p, "- Orders in hand: {} of {}", a.held, a.max_held);
    let _ = writeln!(p, "- Income leaderboard rank: {} of {}", a.rank, a.n_riders);
    let _ = writeln!(p, "- Work style: {}", diligence_phrase(a.diligence));
    if perceives {
        if let Some(e) = a.emotion {
            match a.pad {
                Some(pad) => {
                    let _ = writeln!(
                        p,
                        "- Current emotion: {e} (pleasure {:.2}, arousal {:.2}, dominance {:.2})",
                        pad.pleasure, pad.arousal, pad.dominance
                    );
                }
                None => {
                    let _ = writeln!(p, "- Current emotion: {e}");
                }
            }
        }
    }

    if variant.self_explains() && !memories.is_empty() {
        p.push_str("\n## Your recent decisions made in the same emotion\n");
        for m in memories {
            let _ = writeln!(
                p,
                "- Step {}: {} -> {}. Reason: {}",
                m.created_at,
                m.question,
                m.answer,
                m.reason.trim()
            );
        }
    }

    p.push_str("\n## Decision\n");
    p.push_str(&q.question_text);
    p.push('\n');
    if perceives {
        p.push_str(COT_CUE);
        p.push('\n');
    }
    p.push('\n');
    p.push_str(if variant.self_explains() {
        EXPLAIN_INSTRUCTION
    } else {
        ANSWER_ONLY_INSTRUCTION
    });
    p.push('\n');
    p
}
