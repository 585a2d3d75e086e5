//! Text embedding backends.
//!
//! `fallback` is a deterministic signed feature-hashing encoder (word
//! unigrams, word bigrams and character trigrams) that needs no network.
//! `remote` POSTs `{"texts": [...]}` to an HTTP endpoint and expects
//! `{"vectors": [[...], ...]}` back.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FALLBACK_DIM: usize = 256;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding backend unreachable: {0}")]
    Unreachable(String),
    #[error("embedding backend returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("embedding backend sent an unreadable response: {0}")]
    Decode(String),
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding backend returned {got} vectors for {expected} texts")]
    CountMismatch { expected: usize, got: usize },
    #[error("embedding contains non-finite values")]
    NonFinite,
}

impl EmbedError {
    /// Transport-level failures worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            EmbedError::Unreachable(_) => true,
            EmbedError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(pub Vec<f64>);

impl Embedding {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn average(a: &Embedding, b: &Embedding) -> Result<Embedding, EmbedError> {
        if a.dim() != b.dim() {
            return Err(EmbedError::DimensionMismatch {
                expected: a.dim(),
                got: b.dim(),
            });
        }
        Ok(Embedding(
            a.0.iter().zip(&b.0).map(|(x, y)| (x + y) / 2.0).collect(),
        ))
    }
}

pub trait Embedder {
    /// Stable identifier recorded in cluster artifacts.
    fn backend_id(&self) -> String;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>, EmbedError>;

    fn embed(&self, text: &str) -> Result<Embedding, EmbedError> {
        let mut out = self.embed_batch(&[text])?;
        out.pop().ok_or(EmbedError::CountMismatch { expected: 1, got: 0 })
    }
}

/// How to rebuild the embedder that produced an artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderSpec {
    Fallback {
        dim: usize,
        seed: u64,
    },
    Remote {
        endpoint: String,
        /// Environment variable holding the bearer token.
        token_env: Option<String>,
        timeout_ms: u64,
    },
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        EmbedderSpec::Fallback {
            dim: FALLBACK_DIM,
            seed: 0,
        }
    }
}

impl EmbedderSpec {
    pub fn build(&self) -> Result<Box<dyn Embedder>, EmbedError> {
        Ok(match self {
            EmbedderSpec::Fallback { dim, seed } => Box::new(FeatureHashEmbedder::new(*dim, *seed)),
            EmbedderSpec::Remote {
                endpoint,
                token_env,
                timeout_ms,
            } => {
                let token = token_env.as_deref().and_then(|v| std::env::var(v).ok());
                Box::new(RemoteEmbedder::new(
                    endpoint.clone(),
                    token,
                    Duration::from_millis(*timeout_ms),
                )?)
            }
        })
    }
}

#[derive(Debug, Clone)]
pub struct FeatureHashEmbedder {
    dim: usize,
    seed: u64,
}

impl Default for FeatureHashEmbedder {
    fn default() -> Self {
        Self::new(FALLBACK_DIM, 0)
    }
}

impl FeatureHashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim, seed }
    }

    fn hash(&self, feature: &str) -> u64 {
        // FNV-1a over seed bytes then feature bytes: stable across platforms
        // and toolchains, unlike std's DefaultHasher.
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0100_0000_01b3;
        let mut h = OFFSET;
        for b in self.seed.to_le_bytes().iter().chain(feature.as_bytes()) {
            h ^= u64::from(*b);
            h = h.wrapping_mul(PRIME);
        }
        // Final avalanche so low bits depend on every input byte.
        h ^= h >> 33;
        h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
        h ^= h >> 33;
        h
    }

    fn add(&self, v: &mut [f64], feature: &str, weight: f64) {
        let h = self.hash(feature);
        let bucket = (h % self.dim as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        v[bucket] += sign * weight;
    }

    fn encode(&self, text: &str) -> Result<Embedding, EmbedError> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let lower = trimmed.to_lowercase();
        let mut words: Vec<&str> = lower
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .collect();
        if words.is_empty() {
            words.push(&lower);
        }

        let mut v = vec![0.0; self.dim];
        for w in &words {
            self.add(&mut v, &format!("w:{w}"), 1.0);
            let chars: Vec<char> = format!("^{w}$").chars().collect();
            for tri in chars.windows(3) {
                let tri: String = tri.iter().collect();
                self.add(&mut v, &format!("c:{tri}"), 0.5);
            }
        }
        for pair in words.windows(2) {
            self.add(&mut v, &format!("b:{} {}", pair[0], pair[1]), 0.7);
        }

        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(Embedding(v))
    }
}

impl Embedder for FeatureHashEmbedder {
    fn backend_id(&self) -> String {
        format!("fallback-fh{}-s{}", self.dim, self.seed)
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>, EmbedError> {
        texts.iter().map(|t| self.encode(t)).collect()
    }
}

#[derive(Serialize)]
struct RemoteRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct RemoteResponse {
    vectors: Vec<Vec<f64>>,
}

pub struct RemoteEmbedder {
    endpoint: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(endpoint: String, token: Option<String>, timeout: Duration) -> Result<Self, EmbedError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EmbedError::Unreachable(e.to_string()))?;
        Ok(Self {
            endpoint,
            token,
            client,
        })
    }
}

impl Embedder for RemoteEmbedder {
    fn backend_id(&self) -> String {
        format!("remote:{}", self.endpoint)
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>, EmbedError> {
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(EmbedError::EmptyText);
        }
        let mut req = self.client.post(&self.endpoint).json(&RemoteRequest { texts });
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| EmbedError::Unreachable(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(EmbedError::Http {
                status: status.as_u16(),
                body,
            });
        }
        let parsed: RemoteResponse = resp.json().map_err(|e| EmbedError::Decode(e.to_string()))?;
        if parsed.vectors.len() != texts.len() {
            return Err(EmbedError::CountMismatch {
                expected: texts.len(),
                got: parsed.vectors.len(),
            });
        }
        let dim = parsed.vectors.first().map_or(0, Vec::len);
        parsed
            .vectors
            .into_iter()
            .map(|v| {
                if v.len() != dim {
                    Err(EmbedError::DimensionMismatch {
                        expected: dim,
                        got: v.len(),
                    })
                } else if v.iter().any(|x| !x.is_finite()) {
                    Err(EmbedError::NonFinite)
                } else {
                    Ok(Embedding(v))
                }
            })
            .collect()
    }
}
