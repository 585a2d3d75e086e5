//! The self-explaining decision loop and its memory.
//!
//! A decision encodes the offered order as a question, optionally gathers
//! role examples for the rider's current emotion and recent related memories,
//! renders a prompt for the configured framework variant, asks a backend,
//! parses `ANSWER:` / `REASON:` out of the reply and, for the emotion-aligned
//! variant, stores the explanation for later decisions.

mod decide;
mod llm;
mod memory;
mod parse;
mod policy;
mod prompt;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::config::sha256_hex;
use crate::types::{DiligenceLevel, EmotionLabel, PadState};

pub use decide::{
    decide, BackendError, DecisionBackend, DecisionContext, DecisionOutcome, DecisionTrace,
    IncidentKind, RoleLibrary, ScriptedBackend, TraceStep,
};
pub use llm::{ChatMessage, ChatRequest, ChatResponse, LlmBackend, LlmConfig};
pub use memory::{recall, MemoryStore, RECALL_LIMIT};
pub use parse::{parse_response, ParseError, ParsedResponse};
pub use policy::{emotion_bias, rule_based_policy, RuleBackend, STAMINA_GUARD};
pub use prompt::{build_prompt, COT_CUE, EMOTION_TOKENS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Answer {
    Accept,
    Reject,
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Answer::Accept => "Accept",
            Answer::Reject => "Reject",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSummary {
    pub order_id: u64,
    pub value: f64,
    /// Cells from the rider to the pickup.
    pub pickup_distance: u32,
    /// Cells from the pickup to the drop-off.
    pub delivery_distance: u32,
    pub deadline_step: u32,
}

/// What the rider knows about itself when an order is offered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub rider_id: u32,
    pub stamina: f64,
    pub income: f64,
    pub held: u32,
    pub max_held: u32,
    /// `None` when the framework does not perceive emotion.
    pub emotion: Option<EmotionLabel>,
    pub pad: Option<PadState>,
    pub diligence: DiligenceLevel,
    pub rank: u32,
    pub n_riders: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionQuestion {
    pub question_text: String,
    pub order: OrderSummary,
    pub agent: AgentSnapshot,
    pub step: u32,
}

impl DecisionQuestion {
    pub fn new(order: OrderSummary, agent: AgentSnapshot, step: u32) -> Self {
        debug_assert!(agent.held <= agent.max_held);
        let question_text = format!(
            "Order #{} is offered to you at step {}. It pays {:.2}. The pickup is {} cells away from you \
             and the drop-off is {} cells beyond the pickup. It must be delivered by step {}. \
             Do you accept this order?",
            order.order_id,
            step,
            order.value,
            order.pickup_distance,
            order.delivery_distance,
            order.deadline_step
        );
        Self {
            question_text,
            order,
            agent,
            step,
        }
    }

    /// Short stable digest of the question text.
    pub fn digest(&self) -> String {
        sha256_hex(self.question_text.as_bytes())[..16].to_string()
    }

    pub fn total_distance(&self) -> u32 {
        self.order.pickup_distance + self.order.delivery_distance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionResponse {
    pub answer: Answer,
    pub reason: String,
    pub backend_id: String,
    #[serde(skip)]
    pub latency: Duration,
}

/// One remembered decision: the question, what was decided and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryRecord {
    pub question_digest: String,
    pub question: String,
    pub answer: Answer,
    pub reason: String,
    pub created_at: u32,
    pub emotion_at_decision: EmotionLabel,
}
