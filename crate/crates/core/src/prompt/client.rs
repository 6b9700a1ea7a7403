//! Minimal chat-completions client.
//!
//! `POST {base_url}/chat/completions` with
//! `{"model", "messages": [{"role", "content"}...], "temperature", "seed"?}`
//! and a bearer token when an API key is configured. The reply's
//! `choices[0].message.content` is returned.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::time::Duration;
use thiserror::Error;

pub const MAX_ATTEMPTS: u32 = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    TransportError { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    ApiError { status: u16, body: String },
    #[error("endpoint returned no message content")]
    EmptyResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    #[serde(default)]
    pub api_key: Option<String>,
    pub model: String,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    /// Include `seed` in requests; some servers reject unknown fields.
    #[serde(default = "default_true")]
    pub send_seed: bool,
    /// First retry delay; doubles on each further retry.
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

fn default_timeout() -> f64 {
    60.0
}

fn default_true() -> bool {
    true
}

fn default_backoff() -> u64 {
    1000
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            api_key: None,
            model: model.into(),
            timeout_s: default_timeout(),
            send_seed: true,
            backoff_ms: default_backoff(),
        }
    }

    pub fn url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: "user".into(), content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: "assistant".into(), content: content.into() }
    }
}

pub fn request_body(config: &EndpointConfig, messages: &[ChatMessage], temperature: f64, seed: u64) -> Value {
    let mut body = json!({ "model": config.model, "messages": messages, "temperature": temperature });
    if config.send_seed {
        body["seed"] = json!(seed);
    }
    body
}

/// First choice's content, or `EmptyResponse` when missing or blank.
pub fn parse_reply(body: &str) -> Result<String, LlmError> {
    let v: Value = serde_json::from_str(body).map_err(|_| LlmError::EmptyResponse)?;
    match v.pointer("/choices/0/message/content").and_then(Value::as_str) {
        Some(s) if !s.trim().is_empty() => Ok(s.to_string()),
        _ => Err(LlmError::EmptyResponse),
    }
}

/// Send one chat request. Transport failures are retried up to
/// `MAX_ATTEMPTS` times in total with exponential backoff; HTTP error
/// statuses are returned at once.
pub fn chat(config: &EndpointConfig, messages: &[ChatMessage], temperature: f64, seed: u64) -> Result<String, LlmError> {
    let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs_f64(config.timeout_s.max(0.001))).build();
    let body = request_body(config, messages, temperature, seed);
    let mut last = String::new();
    for attempt in 1..=MAX_ATTEMPTS {
        if attempt > 1 {
            let delay = config.backoff_ms.saturating_mul(1 << (attempt - 2));
            log::warn!("LLM request failed ({last}); retrying in {delay} ms");
            std::thread::sleep(Duration::from_millis(delay));
        }
        let mut req = agent.post(&config.url());
        if let Some(key) = &config.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        match req.send_json(&body) {
            Ok(resp) => {
                let text = resp.into_string().map_err(|e| LlmError::TransportError { attempts: attempt, message: e.to_string() })?;
                return parse_reply(&text);
            }
            Err(ureq::Error::Status(status, resp)) => {
                return Err(LlmError::ApiError { status, body: resp.into_string().unwrap_or_default() });
            }
            Err(ureq::Error::Transport(t)) => last = t.to_string(),
        }
    }
    Err(LlmError::TransportError { attempts: MAX_ATTEMPTS, message: last })
}

/// Shorthand for a single-message conversation.
pub fn call_llm(config: &EndpointConfig, prompt: &str, temperature: f64, seed: u64) -> Result<String, LlmError> {
    chat(config, &[ChatMessage::user(prompt)], temperature, seed)
}
