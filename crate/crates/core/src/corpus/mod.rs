//! Emotion corpus ingestion, clustering and role-example sampling.
//!
//! Corpus files are JSONL, one record per line:
//!
//! ```text
//! {"id": "r1", "text": "...", "emotion": "Anger", "behavior": "...", "context": "...", "causality": true}
//! ```
//!
//! `context` and `causality` are optional. Rows without an emotion or a
//! behavior, or flagged `"causality": false`, are dropped and counted.

mod embed;
mod index;
mod kmeans;

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;
use tracing::warn;

use crate::types::EmotionLabel;

pub use embed::{
    EmbedError, Embedder, EmbedderSpec, Embedding, FeatureHashEmbedder, RemoteEmbedder, FALLBACK_DIM,
};
pub use index::{
    build_index, closest_cluster, cluster_and_sample, role_examples, ClusterMember, ClusterOptions,
    ClusterResult, CorpusIndex, DistanceMetric, EmbeddedRecord, EmotionSection, RoleExamples,
    SampleText, Sampling, INDEX_FORMAT, INDEX_VERSION,
};
pub use kmeans::{kmeans, squared_distance, KMeansFit, KMeansParams};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: unknown emotion label `{label}`")]
    UnknownEmotion { line: usize, label: String },
    #[error("line {line}: Neutral records are not accepted; the corpus covers six emotions")]
    NeutralRecord { line: usize },
    #[error("line {line}: duplicate record id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("need at least k={k} records to cluster, got {got}")]
    TooFewRecords { k: usize, got: usize },
    #[error("emotion {emotion}: sub-corpus has {got} records but k={k}")]
    SubCorpusTooSmall {
        emotion: EmotionLabel,
        k: usize,
        got: usize,
    },
    #[error("k must be at least 1")]
    ZeroK,
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("unsupported cluster artifact: {0}")]
    Artifact(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusRecord {
    pub id: String,
    pub text: String,
    /// Optional surrounding context; averaged with `text` when embedding.
    pub context: Option<String>,
    pub emotion: EmotionLabel,
    pub has_behavior_causality: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub records: Vec<CorpusRecord>,
    /// Rows lacking an emotion or a behavior.
    pub dropped_incomplete: usize,
    /// Rows explicitly marked without emotion-behavior causality.
    pub dropped_no_causality: usize,
}

impl LoadReport {
    pub fn dropped(&self) -> usize {
        self.dropped_incomplete + self.dropped_no_causality
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<String>,
    text: Option<String>,
    context: Option<String>,
    emotion: Option<String>,
    behavior: Option<String>,
    causality: Option<bool>,
}

fn present(v: &Option<String>) -> bool {
    v.as_deref().is_some_and(|s| !s.trim().is_empty())
}

pub fn parse_corpus(text: &str) -> Result<LoadReport, CorpusError> {
    let mut report = LoadReport::default();
    let mut seen = std::collections::HashSet::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(raw_line).map_err(|e| CorpusError::Malformed {
            line,
            reason: e.to_string(),
        })?;
        if !present(&raw.emotion) || !present(&raw.behavior) {
            report.dropped_incomplete += 1;
            continue;
        }
        let label = raw.emotion.unwrap_or_default();
        let emotion: EmotionLabel = label.parse().map_err(|_| CorpusError::UnknownEmotion {
            line,
            label: label.clone(),
        })?;
        if emotion == EmotionLabel::Neutral {
            return Err(CorpusError::NeutralRecord { line });
        }
        if raw.causality == Some(false) {
            report.dropped_no_causality += 1;
            continue;
        }
        let text = raw.text.unwrap_or_default();
        if text.trim().is_empty() {
            return Err(CorpusError::Malformed {
                line,
                reason: "empty text".into(),
            });
        }
        let id = raw.id.unwrap_or_else(|| format!("L{line}"));
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateId { line, id });
        }
        report.records.push(CorpusRecord {
            id,
            text,
            context: raw.context.filter(|c| !c.trim().is_empty()),
            emotion,
            has_behavior_causality: true,
        });
    }
    if report.records.is_empty() {
        warn!("corpus is empty after filtering");
    }
    if report.dropped() > 0 {
        warn!(
            incomplete = report.dropped_incomplete,
            no_causality = report.dropped_no_causality,
            "dropped corpus rows"
        );
    }
    Ok(report)
}

pub fn load_corpus(path: &Path) -> Result<LoadReport, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(&text)
}

/// Embeds each record, averaging context and utterance vectors when both exist.
pub fn embed_records(
    records: &[CorpusRecord],
    embedder: &dyn Embedder,
) -> Result<Vec<EmbeddedRecord>, CorpusError> {
    let texts: Vec<&str> = records.iter().map(|r| r.text.as_str()).collect();
    let vectors = embedder.embed_batch(&texts)?;
    let dim = vectors.first().map_or(0, Embedding::dim);
    let mut out = Vec::with_capacity(records.len());
    for (record, vector) in records.iter().zip(vectors) {
        let vector = match &record.context {
            Some(ctx) => Embedding::average(&embedder.embed(ctx)?, &vector)?,
            None => vector,
        };
        if vector.dim() != dim {
            return Err(EmbedError::DimensionMismatch {
                expected: dim,
                got: vector.dim(),
            }
            .into());
        }
        out.push(EmbeddedRecord {
            id: record.id.clone(),
            text: record.text.clone(),
            emotion: record.emotion,
            vector,
        });
    }
    Ok(out)
}
