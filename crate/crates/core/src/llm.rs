//! One chat wire contract for every LLM role (generator, judge, agents,
//! extractor): `POST {"model", "messages", "temperature", "max_tokens"}`
//! returning `{"choices": [{"message": {"content": ...}}]}`.
//!
//! Backends are interchangeable: an HTTP client with retry/backoff, a
//! scripted mock replaying canned responses (keyed by request hash or by
//! substring rules) for offline tests, and an echo mock for determinism
//! checks.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

/// One chat message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }
}

/// The exact request body sent over the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: usize,
}

impl ChatRequest {
    /// Stable 64-bit hash of the canonical request JSON; scripted backends
    /// key replays on this.
    pub fn stable_hash(&self) -> u64 {
        let canonical = serde_json::to_string(self).expect("request serializes");
        text::fnv1a64(canonical.as_bytes(), 0)
    }
}

#[derive(Deserialize)]
struct ChatReply {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

/// A chat completion backend. Implementations must be safe to share across
/// threads; the engine-wide [`Limiter`] caps in-flight requests.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, messages: &[Message]) -> Result<String>;

    /// Short human-readable identity for logs and health endpoints.
    fn describe(&self) -> String;
}

/// Counting semaphore bounding concurrent LLM requests engine-wide.
pub struct Limiter {
    max: usize,
    in_flight: Mutex<usize>,
    released: Condvar,
}

impl Limiter {
    pub fn new(max: usize) -> Arc<Self> {
        Arc::new(Limiter {
            max: max.max(1),
            in_flight: Mutex::new(0),
            released: Condvar::new(),
        })
    }

    pub fn acquire(self: &Arc<Self>) -> LimiterGuard {
        let mut count = self.in_flight.lock().unwrap();
        while *count >= self.max {
            count = self.released.wait(count).unwrap();
        }
        *count += 1;
        LimiterGuard {
            limiter: Arc::clone(self),
        }
    }

    pub fn in_flight(&self) -> usize {
        *self.in_flight.lock().unwrap()
    }
}

pub struct LimiterGuard {
    limiter: Arc<Limiter>,
}

impl Drop for LimiterGuard {
    fn drop(&mut self) {
        let mut count = self.limiter.in_flight.lock().unwrap();
        *count -= 1;
        self.limiter.released.notify_one();
    }
}

/// Exponential backoff with jitter for retry attempt `n` (1-based).
pub fn backoff_delay(attempt: u32) -> Duration {
    use rand::Rng;
    let base_ms = 50u64.saturating_mul(1 << attempt.saturating_sub(1).min(6));
    let capped = base_ms.min(2_000);
    let jitter = rand::thread_rng().gen_range(0..=capped / 2);
    Duration::from_millis(capped + jitter)
}

/// Remote HTTP chat backend.
pub struct HttpChatBackend {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: usize,
    pub timeout: Duration,
    pub max_retries: u32,
    limiter: Option<Arc<Limiter>>,
}

impl HttpChatBackend {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        temperature: f64,
        max_tokens: usize,
        timeout: Duration,
        max_retries: u32,
    ) -> Self {
        HttpChatBackend {
            endpoint: endpoint.into(),
            model: model.into(),
            temperature,
            max_tokens,
            timeout,
            max_retries,
            limiter: None,
        }
    }

    pub fn with_limiter(mut self, limiter: Arc<Limiter>) -> Self {
        self.limiter = Some(limiter);
        self
    }

    fn request(&self, messages: &[Message]) -> ChatRequest {
        ChatRequest {
            model: self.model.clone(),
            messages: messages.to_vec(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        }
    }
}

impl ChatBackend for HttpChatBackend {
    fn complete(&self, messages: &[Message]) -> Result<String> {
        let _guard = self.limiter.as_ref().map(|l| l.acquire());
        let body = serde_json::to_value(self.request(messages))?;

        let mut last_err = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(backoff_delay(attempt));
            }
            match ureq::post(&self.endpoint)
                .timeout(self.timeout)
                .send_json(body.clone())
            {
                Ok(resp) => match resp.into_json::<ChatReply>() {
                    Ok(reply) => {
                        return reply
                            .choices
                            .into_iter()
                            .next()
                            .map(|c| c.message.content)
                            .ok_or_else(|| Error::Backend("reply has no choices".into()));
                    }
                    Err(e) => last_err = format!("malformed reply body: {e}"),
                },
                Err(ureq::Error::Status(code, _)) => last_err = format!("status {code}"),
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(Error::Backend(format!(
            "chat request to {} failed after {} retries: {last_err}",
            self.endpoint, self.max_retries
        )))
    }

    fn describe(&self) -> String {
        format!("http:{}@{}", self.model, self.endpoint)
    }
}

/// Mock backend echoing the last user message back; with it the whole query
/// path is deterministic and the reply exposes exactly what was prompted.
#[derive(Debug, Default, Clone)]
pub struct EchoBackend;

impl ChatBackend for EchoBackend {
    fn complete(&self, messages: &[Message]) -> Result<String> {
        messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.clone())
            .ok_or_else(|| Error::Backend("no user message to echo".into()))
    }

    fn describe(&self) -> String {
        "echo".into()
    }
}

/// Scripted mock backend. Resolution order per request: exact request-hash
/// replay, then the first substring rule matching any message content, then
/// the default response.
pub struct ScriptedBackend {
    model: String,
    temperature: f64,
    max_tokens: usize,
    by_hash: HashMap<u64, String>,
    rules: Vec<(String, String)>,
    default: Option<String>,
}

/// Script file: `{"rules": [{"match": ..., "response": ...}], "default": ...}`.
#[derive(Serialize, Deserialize)]
pub struct ScriptFile {
    #[serde(default)]
    pub rules: Vec<ScriptRule>,
    #[serde(default)]
    pub default: Option<String>,
}

#[derive(Serialize, Deserialize)]
pub struct ScriptRule {
    #[serde(rename = "match")]
    pub pattern: String,
    pub response: String,
}

impl ScriptedBackend {
    pub fn new(model: impl Into<String>) -> Self {
        ScriptedBackend {
            model: model.into(),
            temperature: 0.0,
            max_tokens: 1024,
            by_hash: HashMap::new(),
            rules: Vec::new(),
            default: None,
        }
    }

    pub fn from_file(model: impl Into<String>, path: &Path) -> Result<Self> {
        let script: ScriptFile = serde_json::from_slice(&std::fs::read(path)?)?;
        let mut backend = ScriptedBackend::new(model);
        for rule in script.rules {
            backend = backend.respond_when(rule.pattern, rule.response);
        }
        if let Some(default) = script.default {
            backend = backend.respond_default(default);
        }
        Ok(backend)
    }

    /// Canned reply for one exact request (see [`ChatRequest::stable_hash`]).
    pub fn respond_to_hash(mut self, hash: u64, response: impl Into<String>) -> Self {
        self.by_hash.insert(hash, response.into());
        self
    }

    /// Canned reply for any request whose message contents contain `pattern`.
    pub fn respond_when(mut self, pattern: impl Into<String>, response: impl Into<String>) -> Self {
        self.rules.push((pattern.into(), response.into()));
        self
    }

    pub fn respond_default(mut self, response: impl Into<String>) -> Self {
        self.default = Some(response.into());
        self
    }

    /// The request this backend would send, so tests can precompute hashes.
    pub fn request_for(&self, messages: &[Message]) -> ChatRequest {
        ChatRequest {
            model: self.model.clone(),
            messages: messages.to_vec(),
            temperature: self.temperature,
            max_tokens: self.max_tokens,
        }
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, messages: &[Message]) -> Result<String> {
        let hash = self.request_for(messages).stable_hash();
        if let Some(response) = self.by_hash.get(&hash) {
            return Ok(response.clone());
        }
        for (pattern, response) in &self.rules {
            if messages.iter().any(|m| m.content.contains(pattern)) {
                return Ok(response.clone());
            }
        }
        self.default.clone().ok_or_else(|| {
            Error::Backend(format!("no scripted response for request hash {hash:016x}"))
        })
    }

    fn describe(&self) -> String {
        format!("scripted:{}", self.model)
    }
}
