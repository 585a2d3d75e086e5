use serde::{Deserialize, Serialize};

use crate::cognition::IncidentKind;
use crate::geometry::GridPos;
use crate::types::{EmotionLabel, PadState};

/// Bumped whenever an event's shape changes.
pub const EVENT_SCHEMA_VERSION: u32 = 1;

/// One line of `events.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub v: u32,
    pub step: u32,
    #[serde(flatten)]
    pub event: Event,
}

impl EventRecord {
    pub fn new(step: u32, event: Event) -> Self {
        Self {
            v: EVENT_SCHEMA_VERSION,
            step,
            event,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestState {
    ReturningHome,
    Resting,
    BackToWork,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Event {
    OrderSpawned {
        order: u64,
        maker: GridPos,
        booker: GridPos,
        value: f64,
    },
    OrderAssigned {
        order: u64,
        rider: u32,
    },
    OrderAccepted {
        order: u64,
        rider: u32,
        emotion: EmotionLabel,
    },
    OrderRejected {
        order: u64,
        rider: u32,
        emotion: EmotionLabel,
        /// The rejection was a fallback, not a genuine decision.
        incident: bool,
    },
    OrderPickedUp {
        order: u64,
        rider: u32,
    },
    OrderDelivered {
        order: u64,
        rider: u32,
        value: f64,
    },
    OrderExpired {
        order: u64,
    },
    RiderMoved {
        rider: u32,
        position: GridPos,
        cells: u32,
    },
    RiderEmotion {
        rider: u32,
        emotion: EmotionLabel,
        pad: PadState,
    },
    RiderRest {
        rider: u32,
        state: RestState,
    },
    Incident {
        rider: u32,
        order: u64,
        kind: IncidentKind,
    },
}
