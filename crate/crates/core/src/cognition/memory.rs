use serde::{Deserialize, Serialize};

use super::{DecisionQuestion, MemoryRecord};
use crate::types::EmotionLabel;

/// Most memories fed into one decision.
pub const RECALL_LIMIT: usize = 5;

/// A rider's private store of past explanations, oldest first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MemoryStore {
    records: Vec<MemoryRecord>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[MemoryRecord] {
        &self.records
    }

    pub fn store(&mut self, record: MemoryRecord) {
        debug_assert!(
            self.records.last().is_none_or(|r| r.created_at <= record.created_at),
            "memories must be stored in time order"
        );
        self.records.push(record);
    }

    /// Drops every record older than `ttl` steps. Age exactly `ttl` survives.
    pub fn evict(&mut self, now: u32, ttl: u32) {
        self.records
            .retain(|r| now.saturating_sub(r.created_at) <= ttl);
    }

    /// Evicts stale records, then returns up to [`RECALL_LIMIT`] of the
    /// newest survivors made under `emotion`, newest first.
    pub fn recall(&mut self, emotion: Option<EmotionLabel>, now: u32, ttl: u32) -> Vec<MemoryRecord> {
        self.evict(now, ttl);
        let Some(emotion) = emotion else {
            return Vec::new();
        };
        self.records
            .iter()
            .rev()
            .filter(|r| r.emotion_at_decision == emotion)
            .take(RECALL_LIMIT)
            .cloned()
            .collect()
    }
}

pub fn recall(q: &DecisionQuestion, now: u32, ttl: u32, store: &mut MemoryStore) -> Vec<MemoryRecord> {
    store.recall(q.agent.emotion, now, ttl)
}
