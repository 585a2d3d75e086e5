//! Clustering and sampling of role examples, and the versioned cluster
//! artifact consumed by the decision loop.
//!
//! Each emotion's sub-corpus is clustered independently. Within a cluster the
//! members are ordered by descending distance to the centroid (ties by
//! record id) and the first ten form that cluster's example set.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::embed::{Embedder, EmbedderSpec, Embedding};
use super::kmeans::{kmeans, squared_distance, KMeansParams};
use super::{embed_records, CorpusError, CorpusRecord};
use crate::seeding;
use crate::types::EmotionLabel;

pub const INDEX_FORMAT: &str = "delivery-sim/cluster-index";
pub const INDEX_VERSION: u32 = 1;
const TOP_N: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    #[default]
    Euclidean,
    /// `1 - cos(a, b)`; clustering itself still minimises squared Euclidean error.
    Cosine,
}

impl DistanceMetric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            DistanceMetric::Euclidean => squared_distance(a, b).sqrt(),
            DistanceMetric::Cosine => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                if na == 0.0 || nb == 0.0 {
                    1.0
                } else {
                    1.0 - dot / (na * nb)
                }
            }
        }
    }
}

/// Which end of the distance ordering supplies the examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Farthest from the centroid first (diversity sampling).
    #[default]
    Farthest,
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClusterOptions {
    pub params: KMeansParams,
    pub metric: DistanceMetric,
    pub sampling: Sampling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedRecord {
    pub id: String,
    pub text: String,
    pub emotion: EmotionLabel,
    pub vector: Embedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMember {
    pub id: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleText {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    pub cluster_id: usize,
    pub centroid: Vec<f64>,
    pub members: Vec<ClusterMember>,
    pub top10: Vec<SampleText>,
}

/// Runs k-means over `records` and returns exactly `k` sorted clusters.
///
/// Records are processed in id order so the result does not depend on the
/// caller's ordering.
pub fn cluster_and_sample(
    records: &[EmbeddedRecord],
    k: usize,
    seed: u64,
    opts: &ClusterOptions,
) -> Result<Vec<ClusterResult>, CorpusError> {
    if k == 0 {
        return Err(CorpusError::ZeroK);
    }
    if records.len() < k {
        return Err(CorpusError::TooFewRecords {
            k,
            got: records.len(),
        });
    }
    let mut sorted: Vec<&EmbeddedRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let points: Vec<Vec<f64>> = sorted.iter().map(|r| r.vector.0.clone()).collect();

    let mut rng = seeding::stream(seed, seeding::KMEANS);
    let fit = kmeans(&points, k, &opts.params, &mut rng);

    let mut clusters: Vec<ClusterResult> = fit
        .centroids
        .into_iter()
        .enumerate()
        .map(|(cluster_id, centroid)| ClusterResult {
            cluster_id,
            centroid,
            members: Vec::new(),
            top10: Vec::new(),
        })
        .collect();

    for (record, &c) in sorted.iter().zip(&fit.assignments) {
        let distance = opts.metric.distance(&record.vector.0, &clusters[c].centroid);
        clusters[c].members.push(ClusterMember {
            id: record.id.clone(),
            distance,
        });
    }

    for cluster in &mut clusters {
        cluster.members.sort_by(|a, b| {
            let by_distance = match opts.sampling {
                Sampling::Farthest => b.distance.total_cmp(&a.distance),
                Sampling::Nearest => a.distance.total_cmp(&b.distance),
            };
            by_distance.then_with(|| a.id.cmp(&b.id))
        });
        cluster.top10 = cluster
            .members
            .iter()
            .take(TOP_N)
            .map(|m| {
                let text = sorted
                    .iter()
                    .find(|r| r.id == m.id)
                    .map(|r| r.text.clone())
                    .unwrap_or_default();
                SampleText {
                    id: m.id.clone(),
                    text,
                }
            })
            .collect();
    }
    Ok(clusters)
}

/// Index of the cluster whose centroid is nearest to `query`; lowest id on ties.
pub fn closest_cluster(
    query: &Embedding,
    clusters: &[ClusterResult],
    metric: DistanceMetric,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for c in clusters {
        let d = metric.distance(&query.0, &c.centroid);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((c.cluster_id, d));
        }
    }
    best.map(|(id, _)| id)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionSection {
    pub emotion: EmotionLabel,
    pub record_count: usize,
    pub clusters: Vec<ClusterResult>,
}

/// The on-disk cluster artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusIndex {
    pub format: String,
    pub version: u32,
    pub backend: EmbedderSpec,
    pub backend_id: String,
    pub seed: u64,
    pub k: usize,
    pub sampling: Sampling,
    pub metric: DistanceMetric,
    pub sections: Vec<EmotionSection>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoleExamples {
    pub cluster: Option<usize>,
    pub texts: Vec<String>,
}

impl CorpusIndex {
    pub fn section(&self, emotion: EmotionLabel) -> Option<&EmotionSection> {
        self.sections.iter().find(|s| s.emotion == emotion)
    }

    /// Examples from the cluster nearest to an already-encoded question.
    pub fn examples_for(&self, emotion: EmotionLabel, query: &Embedding) -> RoleExamples {
        let Some(section) = self.section(emotion).filter(|s| !s.clusters.is_empty()) else {
            return RoleExamples::default();
        };
        match closest_cluster(query, &section.clusters, self.metric) {
            Some(id) => RoleExamples {
                cluster: Some(id),
                texts: section.clusters[id].top10.iter().map(|s| s.text.clone()).collect(),
            },
            None => RoleExamples::default(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("index serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CorpusError> {
        let index: CorpusIndex =
            serde_json::from_str(text).map_err(|e| CorpusError::Artifact(e.to_string()))?;
        if index.format != INDEX_FORMAT {
            return Err(CorpusError::Artifact(format!("unexpected format `{}`", index.format)));
        }
        if index.version != INDEX_VERSION {
            return Err(CorpusError::Artifact(format!(
                "version {} not supported (expected {INDEX_VERSION})",
                index.version
            )));
        }
        Ok(index)
    }

    pub fn write(&self, path: &Path) -> Result<(), CorpusError> {
        std::fs::write(path, self.to_json()).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Clusters every emotion's sub-corpus and assembles the artifact.
///
/// Emotions with no records are skipped with a warning; an emotion with some
/// records but fewer than `k` is an error.
pub fn build_index(
    records: &[CorpusRecord],
    k: usize,
    seed: u64,
    spec: &EmbedderSpec,
    embedder: &dyn Embedder,
    opts: &ClusterOptions,
) -> Result<CorpusIndex, CorpusError> {
    if k == 0 {
        return Err(CorpusError::ZeroK);
    }
    let mut sections = Vec::new();
    for emotion in EmotionLabel::CORPUS {
        let sub: Vec<CorpusRecord> = records.iter().filter(|r| r.emotion == emotion).cloned().collect();
        if sub.is_empty() {
            warn!(%emotion, "no corpus records for emotion; it will have no role examples");
            continue;
        }
        if sub.len() < k {
            return Err(CorpusError::SubCorpusTooSmall {
                emotion,
                k,
                got: sub.len(),
            });
        }
        let embedded = embed_records(&sub, embedder)?;
        let clusters = cluster_and_sample(&embedded, k, seed, opts)?;
        sections.push(EmotionSection {
            emotion,
            record_count: sub.len(),
            clusters,
        });
    }
    Ok(CorpusIndex {
        format: INDEX_FORMAT.to_string(),
        version: INDEX_VERSION,
        backend: spec.clone(),
        backend_id: embedder.backend_id(),
        seed,
        k,
        sampling: opts.sampling,
        metric: opts.metric,
        sections,
    })
}

/// Up to ten role-definition texts for `emotion`, drawn from the cluster
/// closest to `question`.
pub fn role_examples(
    emotion: EmotionLabel,
    question: &str,
    index: &CorpusIndex,
    embedder: &dyn Embedder,
) -> Result<RoleExamples, CorpusError> {
    if index.section(emotion).is_none_or(|s| s.clusters.is_empty()) {
        warn!(%emotion, "no role corpus for emotion; deciding without examples");
        return Ok(RoleExamples::default());
    }
    let query = embedder.embed(question)?;
    Ok(index.examples_for(emotion, &query))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::FeatureHashEmbedder;

    fn rec(id: &str, v: Vec<f64>) -> EmbeddedRecord {
        EmbeddedRecord {
            id: id.into(),
            text: format!("text {id}"),
            emotion: EmotionLabel::Anger,
            vector: Embedding(v),
        }
    }

    #[test]
    fn identical_points_single_cluster_orders_by_id() {
        let recs = vec![rec("c", vec![1.0, 2.0]), rec("a", vec![1.0, 2.0]), rec("b", vec![1.0, 2.0])];
        let out = cluster_and_sample(&recs, 1, 0, &ClusterOptions::default()).unwrap();
        assert_eq!(out.len(), 1);
        let ids: Vec<_> = out[0].members.iter().map(|m| m.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert!(out[0].members.iter().all(|m| m.distance == 0.0));
    }

    #[test]
    fn too_few_records_is_an_error() {
        let recs = vec![rec("a", vec![0.0])];
        assert!(matches!(
            cluster_and_sample(&recs, 2, 0, &ClusterOptions::default()),
            Err(CorpusError::TooFewRecords { k: 2, got: 1 })
        ));
        assert!(matches!(
            cluster_and_sample(&recs, 0, 0, &ClusterOptions::default()),
            Err(CorpusError::ZeroK)
        ));
    }

    #[test]
    fn nearest_sampling_reverses_the_order() {
        let recs: Vec<_> = (0..5).map(|i| rec(&format!("r{i}"), vec![i as f64])).collect();
        let opts = ClusterOptions {
            sampling: Sampling::Nearest,
            ..Default::default()
        };
        let out = cluster_and_sample(&recs, 1, 0, &opts).unwrap();
        let d: Vec<f64> = out[0].members.iter().map(|m| m.distance).collect();
        assert!(d.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn closest_cluster_single_and_ties() {
        let c = |id, v: Vec<f64>| ClusterResult {
            cluster_id: id,
            centroid: v,
            members: vec![],
            top10: vec![],
        };
        let one = vec![c(0, vec![5.0, 5.0])];
        assert_eq!(closest_cluster(&Embedding(vec![0.0, 0.0]), &one, DistanceMetric::Euclidean), Some(0));
        let tied = vec![c(0, vec![1.0, 0.0]), c(1, vec![-1.0, 0.0])];
        assert_eq!(closest_cluster(&Embedding(vec![0.0, 0.0]), &tied, DistanceMetric::Euclidean), Some(0));
        assert_eq!(closest_cluster(&Embedding(vec![0.0]), &[], DistanceMetric::Euclidean), None);
    }

    #[test]
    fn cosine_metric_basics() {
        let m = DistanceMetric::Cosine;
        assert!((m.distance(&[1.0, 0.0], &[2.0, 0.0])).abs() < 1e-12);
        assert!((m.distance(&[1.0, 0.0], &[0.0, 1.0]) - 1.0).abs() < 1e-12);
    }

    fn corpus_records(n_per: usize) -> Vec<CorpusRecord> {
        let mut out = Vec::new();
        for emotion in EmotionLabel::CORPUS {
            for i in 0..n_per {
                out.push(CorpusRecord {
                    id: format!("{emotion}-{i:02}"),
                    text: format!("{emotion} rider story number {i} about orders {}", i * 7 % 5),
                    context: None,
                    emotion,
                    has_behavior_causality: true,
                });
            }
        }
        out
    }

    #[test]
    fn build_index_structure_and_determinism() {
        let recs = corpus_records(10);
        let e = FeatureHashEmbedder::default();
        let spec = EmbedderSpec::default();
        let a = build_index(&recs, 2, 11, &spec, &e, &ClusterOptions::default()).unwrap();
        assert_eq!(a.sections.len(), 6);
        assert!(a.sections.iter().all(|s| s.clusters.len() == 2));
        let b = build_index(&recs, 2, 11, &spec, &e, &ClusterOptions::default()).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(CorpusIndex::from_json(&a.to_json()).unwrap(), a);
    }

    #[test]
    fn build_index_names_small_emotion() {
        let mut recs = corpus_records(3);
        recs.retain(|r| r.emotion != EmotionLabel::Fear || r.id.ends_with("00"));
        let e = FeatureHashEmbedder::default();
        let err = build_index(&recs, 2, 0, &EmbedderSpec::default(), &e, &ClusterOptions::default())
            .unwrap_err();
        assert!(matches!(err, CorpusError::SubCorpusTooSmall { emotion: EmotionLabel::Fear, .. }));
        assert!(err.to_string().contains("Fear"));
    }

    #[test]
    fn role_examples_without_section_is_empty() {
        let recs = corpus_records(4);
        let e = FeatureHashEmbedder::default();
        let index = build_index(&recs, 1, 0, &EmbedderSpec::default(), &e, &ClusterOptions::default()).unwrap();
        let neutral = role_examples(EmotionLabel::Neutral, "take the order?", &index, &e).unwrap();
        assert!(neutral.texts.is_empty());
        let anger = role_examples(EmotionLabel::Anger, "take the order?", &index, &e).unwrap();
        assert_eq!(anger.texts.len(), 4);
        assert_eq!(anger.cluster, Some(0));
    }

    #[test]
    fn artifact_version_is_checked() {
        let recs = corpus_records(2);
        let e = FeatureHashEmbedder::default();
        let mut index = build_index(&recs, 1, 0, &EmbedderSpec::default(), &e, &ClusterOptions::default()).unwrap();
        index.version = 99;
        assert!(CorpusIndex::from_json(&index.to_json()).is_err());
    }
}
