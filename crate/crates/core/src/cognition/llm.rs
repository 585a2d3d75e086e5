//! Chat-completion client for a hosted or local language model.
//!
//! Speaks the common `{model, messages, temperature}` request shape and reads
//! `choices[0].message.content` back. Transport failures, timeouts, 408, 429
//! and 5xx are retried with exponential backoff up to `max_attempts` total.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use super::decide::{BackendError, DecisionBackend};
use super::DecisionQuestion;
use crate::config::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmConfig {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token; no auth header if unset.
    pub token_env: Option<String>,
    pub timeout_ms: u64,
    pub max_attempts: u32,
    /// First retry waits this long; each later retry doubles it.
    pub backoff_base_ms: u64,
    pub temperature: f64,
    /// Append one JSON line per HTTP attempt here.
    pub request_log: Option<PathBuf>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "default".into(),
            token_env: Some("DSIM_LLM_TOKEN".into()),
            timeout_ms: 30_000,
            max_attempts: 3,
            backoff_base_ms: 500,
            temperature: 0.0,
            request_log: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ChatResponse {
    pub choices: Vec<ChatChoice>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ChatChoice {
    pub message: ChatMessage,
}

#[derive(Serialize)]
struct AttemptLog<'a> {
    attempt: u32,
    prompt_sha256: &'a str,
    status: Option<u16>,
    latency_ms: u64,
    ok: bool,
    error: Option<&'a str>,
}

enum AttemptError {
    Retryable(String),
    Fatal(String),
}

pub struct LlmBackend {
    cfg: LlmConfig,
    token: Option<String>,
    client: reqwest::blocking::Client,
    log: Option<BufWriter<File>>,
}

impl LlmBackend {
    pub fn new(cfg: LlmConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(cfg.timeout_ms))
            .build()
            .map_err(|e| BackendError::Fatal(format!("http client: {e}")))?;
        let token = cfg.token_env.as_deref().and_then(|v| std::env::var(v).ok());
        let log = match &cfg.request_log {
            Some(path) => Some(BufWriter::new(File::create(path).map_err(|e| {
                BackendError::Fatal(format!("request log {}: {e}", path.display()))
            })?)),
            None => None,
        };
        Ok(Self {
            cfg,
            token,
            client,
            log,
        })
    }

    fn attempt(&self, body: &ChatRequest) -> (Option<u16>, Result<String, AttemptError>) {
        let mut req = self.client.post(&self.cfg.endpoint).json(body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) => return (None, Err(AttemptError::Retryable(e.to_string()))),
        };
        let status = resp.status();
        let code = Some(status.as_u16());
        if !status.is_success() {
            let msg = format!("HTTP {status}");
            let retry = status.is_server_error() || matches!(status.as_u16(), 408 | 429);
            return (
                code,
                Err(if retry {
                    AttemptError::Retryable(msg)
                } else {
                    AttemptError::Fatal(msg)
                }),
            );
        }
        let parsed: ChatResponse = match resp.json() {
            Ok(p) => p,
            Err(e) => return (code, Err(AttemptError::Fatal(format!("decode: {e}")))),
        };
        match parsed.choices.into_iter().next() {
            Some(c) => (code, Ok(c.message.content)),
            None => (code, Err(AttemptError::Fatal("no choices in response".into()))),
        }
    }

    fn log_attempt(&mut self, entry: &AttemptLog<'_>) {
        if let Some(w) = &mut self.log {
            let line = serde_json::to_string(entry).expect("attempt log serializes");
            if let Err(e) = writeln!(w, "{line}").and_then(|_| w.flush()) {
                warn!(error = %e, "could not write request log");
            }
        }
    }
}

impl DecisionBackend for LlmBackend {
    fn backend_id(&self) -> String {
        format!("llm:{}@{}", self.cfg.model, self.cfg.endpoint)
    }

    fn complete(&mut self, prompt: &str, _q: &DecisionQuestion) -> Result<String, BackendError> {
        let body = ChatRequest {
            model: self.cfg.model.clone(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: prompt.to_string(),
            }],
            temperature: self.cfg.temperature,
        };
        let prompt_hash = sha256_hex(prompt.as_bytes());
        let attempts = self.cfg.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            let started = Instant::now();
            let (status, result) = self.attempt(&body);
            let latency_ms = started.elapsed().as_millis() as u64;
            let err_text = match &result {
                Ok(_) => None,
                Err(AttemptError::Retryable(m) | AttemptError::Fatal(m)) => Some(m.clone()),
            };
            self.log_attempt(&AttemptLog {
                attempt,
                prompt_sha256: &prompt_hash,
                status,
                latency_ms,
                ok: result.is_ok(),
                error: err_text.as_deref(),
            });
            match result {
                Ok(text) => return Ok(text),
                Err(AttemptError::Fatal(m)) => return Err(BackendError::Fatal(m)),
                Err(AttemptError::Retryable(m)) => {
                    debug!(attempt, error = %m, "llm attempt failed");
                    last = m;
                    if attempt < attempts {
                        let wait = self.cfg.backoff_base_ms.saturating_mul(1 << (attempt - 1).min(16));
                        thread::sleep(Duration::from_millis(wait));
                    }
                }
            }
        }
        Err(BackendError::Exhausted {
            attempts,
            last_error: last,
        })
    }
}
