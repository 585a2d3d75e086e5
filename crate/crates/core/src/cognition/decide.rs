use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use super::memory::recall;
use super::parse::parse_response;
use super::prompt::build_prompt;
use super::{Answer, DecisionQuestion, DecisionResponse, MemoryRecord, MemoryStore};
use crate::config::sha256_hex;
use crate::corpus::{CorpusIndex, EmbedError, Embedder};
use crate::types::{EmotionLabel, FrameworkVariant};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend unavailable after {attempts} attempts: {last_error}")]
    Exhausted { attempts: u32, last_error: String },
    #[error("backend failed: {0}")]
    Fatal(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Exhausted { .. })
    }
}

/// Anything that turns a prompt into reply text.
pub trait DecisionBackend {
    fn backend_id(&self) -> String;
    fn complete(&mut self, prompt: &str, q: &DecisionQuestion) -> Result<String, BackendError>;
}

/// Replays canned replies in order and records every prompt it receives.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    replies: VecDeque<Result<String, BackendError>>,
    pub prompts: Vec<String>,
}

impl ScriptedBackend {
    pub fn new(replies: impl IntoIterator<Item = Result<String, BackendError>>) -> Self {
        Self {
            replies: replies.into_iter().collect(),
            prompts: Vec::new(),
        }
    }
}

impl DecisionBackend for ScriptedBackend {
    fn backend_id(&self) -> String {
        "scripted".into()
    }

    fn complete(&mut self, prompt: &str, _q: &DecisionQuestion) -> Result<String, BackendError> {
        self.prompts.push(prompt.to_string());
        self.replies
            .pop_front()
            .unwrap_or_else(|| Err(BackendError::Fatal("script exhausted".into())))
    }
}

/// A cluster index plus the embedder that can encode questions against it.
pub struct RoleLibrary {
    pub index: CorpusIndex,
    pub embedder: Box<dyn Embedder>,
}

impl RoleLibrary {
    /// Rebuilds the embedder recorded in the index.
    pub fn from_index(index: CorpusIndex) -> Result<Self, EmbedError> {
        let embedder = index.backend.build()?;
        let built = embedder.backend_id();
        if built != index.backend_id {
            warn!(expected = %index.backend_id, got = %built, "embedder differs from the one that built the index");
        }
        Ok(Self { index, embedder })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceStep {
    Encode,
    ClosestCluster,
    Recall,
    Prompt,
    Call,
    Parse,
    Store,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncidentKind {
    BackendUnavailable,
    ParseFailure,
}

impl IncidentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IncidentKind::BackendUnavailable => "backend-unavailable",
            IncidentKind::ParseFailure => "parse-failure",
        }
    }
}

/// One line of `decisions.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub step: u32,
    pub rider: u32,
    pub order: u64,
    pub variant: FrameworkVariant,
    pub backend: String,
    pub question_digest: String,
    pub prompt_sha256: String,
    pub answer: Answer,
    pub reason: String,
    pub emotion: Option<EmotionLabel>,
    pub cluster: Option<usize>,
    pub n_examples: usize,
    pub n_memories: usize,
    pub incident: Option<IncidentKind>,
    pub steps: Vec<TraceStep>,
}

pub struct DecisionContext<'a> {
    pub variant: FrameworkVariant,
    pub backend: &'a mut dyn DecisionBackend,
    pub library: Option<&'a RoleLibrary>,
    pub memory: &'a mut MemoryStore,
    pub memory_ttl: u32,
    pub now: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionOutcome {
    pub response: DecisionResponse,
    pub trace: DecisionTrace,
    pub prompt: String,
    pub incident: Option<IncidentKind>,
}

/// Runs one decision for the configured variant.
///
/// Never fails: a backend that gives up or a reply that cannot be parsed
/// becomes a `Reject` flagged with an incident.
pub fn decide(mut q: DecisionQuestion, ctx: DecisionContext<'_>) -> DecisionOutcome {
    let started = Instant::now();
    let variant = ctx.variant;
    if !variant.perceives_emotion() {
        q.agent.emotion = None;
        q.agent.pad = None;
    }
    let mut steps = Vec::new();
    let mut examples = Vec::new();
    let mut cluster = None;
    let mut memories: Vec<MemoryRecord> = Vec::new();

    if variant.self_explains() {
        if let (Some(lib), Some(emotion)) = (ctx.library, q.agent.emotion) {
            if lib.index.section(emotion).is_some_and(|s| !s.clusters.is_empty()) {
                steps.push(TraceStep::Encode);
                match lib.embedder.embed(&q.question_text) {
                    Ok(query) => {
                        steps.push(TraceStep::ClosestCluster);
                        let found = lib.index.examples_for(emotion, &query);
                        cluster = found.cluster;
                        examples = found.texts;
                    }
                    Err(e) => warn!(error = %e, "could not encode question; deciding without role examples"),
                }
            }
        }
        steps.push(TraceStep::Recall);
        memories = recall(&q, ctx.now, ctx.memory_ttl, ctx.memory);
    }

    steps.push(TraceStep::Prompt);
    let prompt = build_prompt(&q, &examples, &memories, variant);
    let backend_id = ctx.backend.backend_id();

    steps.push(TraceStep::Call);
    let (answer, reason, incident) = match ctx.backend.complete(&prompt, &q) {
        Err(e) => {
            warn!(rider = q.agent.rider_id, order = q.order.order_id, error = %e, "backend failed; rejecting");
            let kind = IncidentKind::BackendUnavailable;
            (Answer::Reject, kind.as_str().to_string(), Some(kind))
        }
        Ok(text) => {
            steps.push(TraceStep::Parse);
            match parse_response(&text, variant.self_explains()) {
                Ok(parsed) => (parsed.answer, parsed.reason, None),
                Err(e) => {
                    warn!(rider = q.agent.rider_id, order = q.order.order_id, error = %e, "unparseable reply; rejecting");
                    let kind = IncidentKind::ParseFailure;
                    (Answer::Reject, kind.as_str().to_string(), Some(kind))
                }
            }
        }
    };

    if variant.self_explains() {
        steps.push(TraceStep::Store);
        ctx.memory.store(MemoryRecord {
            question_digest: q.digest(),
            question: q.question_text.clone(),
            answer,
            reason: reason.clone(),
            created_at: ctx.now,
            emotion_at_decision: q.agent.emotion.unwrap_or(EmotionLabel::Neutral),
        });
    }

    let trace = DecisionTrace {
        step: q.step,
        rider: q.agent.rider_id,
        order: q.order.order_id,
        variant,
        backend: backend_id.clone(),
        question_digest: q.digest(),
        prompt_sha256: sha256_hex(prompt.as_bytes()),
        answer,
        reason: reason.clone(),
        emotion: q.agent.emotion,
        cluster,
        n_examples: examples.len(),
        n_memories: memories.len(),
        incident,
        steps,
    };
    DecisionOutcome {
        response: DecisionResponse {
            answer,
            reason,
            backend_id,
            latency: started.elapsed(),
        },
        trace,
        prompt,
        incident,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cognition::{AgentSnapshot, OrderSummary, RuleBackend};
    use crate::types::{DiligenceLevel, PadState};

    fn question(step: u32) -> DecisionQuestion {
        DecisionQuestion::new(
            OrderSummary {
                order_id: step as u64,
                value: 20.0,
                pickup_distance: 10,
                delivery_distance: 20,
                deadline_step: step + 60,
            },
            AgentSnapshot {
                rider_id: 1,
                stamina: 80.0,
                income: 10.0,
                held: 0,
                max_held: 3,
                emotion: Some(EmotionLabel::Happiness),
                pad: Some(PadState::new(0.5, 0.4, 0.3).unwrap()),
                diligence: DiligenceLevel::Average,
                rank: 1,
                n_riders: 4,
            },
            step,
        )
    }

    fn run(
        variant: FrameworkVariant,
        backend: &mut dyn DecisionBackend,
        memory: &mut MemoryStore,
        step: u32,
    ) -> DecisionOutcome {
        decide(
            question(step),
            DecisionContext {
                variant,
                backend,
                library: None,
                memory,
                memory_ttl: 240,
                now: step,
            },
        )
    }

    #[test]
    fn aligned_stores_and_recalls() {
        let mut b = RuleBackend;
        let mut mem = MemoryStore::new();
        let first = run(FrameworkVariant::EmotionAligned, &mut b, &mut mem, 5);
        assert_eq!(first.trace.n_memories, 0);
        assert_eq!(mem.len(), 1);
        let second = run(FrameworkVariant::EmotionAligned, &mut b, &mut mem, 6);
        assert_eq!(second.trace.n_memories, 1);
        assert!(second.prompt.contains(&first.response.reason));
        assert_eq!(
            second.trace.steps,
            [TraceStep::Recall, TraceStep::Prompt, TraceStep::Call, TraceStep::Parse, TraceStep::Store]
        );
    }

    #[test]
    fn other_variants_never_touch_memory() {
        for v in [FrameworkVariant::Traditional, FrameworkVariant::EmotionPerceived] {
            let mut b = RuleBackend;
            let mut mem = MemoryStore::new();
            let out = run(v, &mut b, &mut mem, 1);
            assert!(mem.is_empty());
            assert_eq!(out.trace.steps, [TraceStep::Prompt, TraceStep::Call, TraceStep::Parse]);
        }
    }

    #[test]
    fn traditional_strips_emotion() {
        let mut b = RuleBackend;
        let mut mem = MemoryStore::new();
        let out = run(FrameworkVariant::Traditional, &mut b, &mut mem, 1);
        assert_eq!(out.trace.emotion, None);
        assert!(!out.response.reason.contains("Happiness"));
    }

    #[test]
    fn backend_failure_rejects_with_incident() {
        let mut b = ScriptedBackend::new([Err(BackendError::Exhausted {
            attempts: 3,
            last_error: "HTTP 500".into(),
        })]);
        let mut mem = MemoryStore::new();
        let out = run(FrameworkVariant::EmotionAligned, &mut b, &mut mem, 1);
        assert_eq!(out.response.answer, Answer::Reject);
        assert_eq!(out.response.reason, "backend-unavailable");
        assert_eq!(out.incident, Some(IncidentKind::BackendUnavailable));
    }

    #[test]
    fn unparseable_reply_rejects_with_incident() {
        let mut b = ScriptedBackend::new([Ok("I'd love to!".to_string()), Ok("ANSWER: Accept".to_string())]);
        let mut mem = MemoryStore::new();
        let a = run(FrameworkVariant::EmotionPerceived, &mut b, &mut mem, 1);
        assert_eq!(a.incident, Some(IncidentKind::ParseFailure));
        // Aligned requires a reason, so a bare answer is also a failure.
        let b2 = run(FrameworkVariant::EmotionAligned, &mut b, &mut mem, 2);
        assert_eq!(b2.incident, Some(IncidentKind::ParseFailure));
        assert_eq!(b2.response.answer, Answer::Reject);
    }

    #[test]
    fn scripted_backend_records_prompts() {
        let mut b = ScriptedBackend::new([Ok("ANSWER: Accept\nREASON: fine".to_string())]);
        let mut mem = MemoryStore::new();
        let out = run(FrameworkVariant::EmotionAligned, &mut b, &mut mem, 3);
        assert_eq!(b.prompts, [out.prompt]);
        assert_eq!(out.trace.prompt_sha256, sha256_hex(b.prompts[0].as_bytes()));
    }
}
