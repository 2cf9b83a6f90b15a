//! LLM clients: a chat-completion HTTP client with retry/backoff, and a
//! scripted mock keyed by (task id, round) for offline runs.
//!
//! Wire contract: `{model, messages: [{role, content}], temperature,
//! max_tokens}` -> `{choices: [{message: {content}, finish_reason}]}`.
//! Credentials come from the `CODEPORT_API_KEY` environment variable.

use crate::promptgen::{LlmResponse, PromptText};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;
use thiserror::Error;

pub const API_KEY_ENV: &str = "CODEPORT_API_KEY";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: u32 },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("no scripted response for task {task_id} round {round}")]
    MockMissing { task_id: String, round: u8 },
    #[error("unreadable mock script {path}: {message}")]
    MockScript { path: String, message: String },
}

/// Decoding and transport parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmParams {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub timeout_secs: u64,
    pub retries: u32,
}

impl Default for LlmParams {
    fn default() -> Self {
        LlmParams {
            endpoint: String::new(),
            model: String::new(),
            // Greedy decoding for reproducibility.
            temperature: 0.0,
            max_output_tokens: 4096,
            timeout_secs: 120,
            retries: 2,
        }
    }
}

impl LlmParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.temperature < 0.0 || !self.temperature.is_finite() {
            return Err(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            ));
        }
        if self.max_output_tokens == 0 {
            return Err("max_output_tokens must be positive".to_string());
        }
        Ok(())
    }
}

/// Which task/round a completion belongs to; the mock keys on it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallRoute {
    pub task_id: String,
    pub round: u8,
}

pub trait LlmClient: Send + Sync {
    fn complete(
        &self,
        prompt: &PromptText,
        params: &LlmParams,
        route: &CallRoute,
    ) -> Result<LlmResponse, LlmError>;
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

/// Chat-completion HTTP client. Transient failures (transport errors, 429,
/// 5xx) retry with exponential backoff up to `params.retries` extra
/// attempts; everything else surfaces immediately.
pub struct HttpLlm {
    pub api_key_env: String,
    backoff_base: Duration,
}

impl Default for HttpLlm {
    fn default() -> Self {
        HttpLlm {
            api_key_env: API_KEY_ENV.to_string(),
            backoff_base: Duration::from_millis(200),
        }
    }
}

impl HttpLlm {
    pub fn new() -> Self {
        HttpLlm::default()
    }

    #[cfg(test)]
    fn with_backoff(base: Duration) -> Self {
        HttpLlm {
            api_key_env: API_KEY_ENV.to_string(),
            backoff_base: base,
        }
    }

    fn attempt(
        &self,
        prompt: &PromptText,
        params: &LlmParams,
    ) -> Result<LlmResponse, AttemptError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(params.timeout_secs)))
            .build()
            .into();
        let mut request = agent.post(&params.endpoint);
        if let Ok(key) = std::env::var(&self.api_key_env) {
            request = request.header("authorization", &format!("Bearer {key}"));
        }
        let body = ChatRequest {
            model: &params.model,
            messages: vec![ChatMessage {
                role: "user",
                content: &prompt.text,
            }],
            temperature: params.temperature,
            max_tokens: params.max_output_tokens,
        };
        let mut response = request.send_json(&body).map_err(|e| match &e {
            ureq::Error::StatusCode(code) if *code == 429 || *code >= 500 => {
                AttemptError::Retryable(e.to_string())
            }
            ureq::Error::StatusCode(_) => AttemptError::Fatal(e.to_string()),
            _ => AttemptError::Retryable(e.to_string()),
        })?;
        let parsed: ChatResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| AttemptError::Fatal(format!("malformed response: {e}")))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| AttemptError::Fatal("response has no choices".to_string()))?;
        Ok(LlmResponse {
            raw_text: choice.message.content,
            extracted_code: None,
            finish_reason: choice.finish_reason.unwrap_or_else(|| "stop".to_string()),
        })
    }
}

enum AttemptError {
    Retryable(String),
    Fatal(String),
}

impl LlmClient for HttpLlm {
    fn complete(
        &self,
        prompt: &PromptText,
        params: &LlmParams,
        _route: &CallRoute,
    ) -> Result<LlmResponse, LlmError> {
        let attempts_allowed = params.retries + 1;
        let mut last_message = String::new();
        for attempt in 0..attempts_allowed {
            match self.attempt(prompt, params) {
                Ok(response) => return Ok(response),
                Err(AttemptError::Fatal(message)) => return Err(LlmError::Protocol(message)),
                Err(AttemptError::Retryable(message)) => {
                    last_message = message;
                    if attempt + 1 < attempts_allowed {
                        let backoff = self.backoff_base * 2u32.pow(attempt.min(8));
                        std::thread::sleep(backoff.min(Duration::from_secs(5)));
                    }
                }
            }
        }
        Err(LlmError::Transport {
            message: last_message,
            attempts: attempts_allowed,
        })
    }
}

/// Scripted responses keyed by task id, then round ("0" initial, "1" first
/// repair). The whole pipeline runs offline and deterministically with it.
#[derive(Debug, Clone, Default)]
pub struct MockLlm {
    script: BTreeMap<String, BTreeMap<String, String>>,
}

impl MockLlm {
    pub fn from_file(path: &Path) -> Result<MockLlm, LlmError> {
        let raw = std::fs::read_to_string(path).map_err(|e| LlmError::MockScript {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let script = serde_json::from_str(&raw).map_err(|e| LlmError::MockScript {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(MockLlm { script })
    }

    pub fn from_entries(entries: &[(&str, u8, &str)]) -> MockLlm {
        let mut script: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for (task_id, round, text) in entries {
            script
                .entry(task_id.to_string())
                .or_default()
                .insert(round.to_string(), text.to_string());
        }
        MockLlm { script }
    }
}

impl LlmClient for MockLlm {
    fn complete(
        &self,
        _prompt: &PromptText,
        _params: &LlmParams,
        route: &CallRoute,
    ) -> Result<LlmResponse, LlmError> {
        let text = self
            .script
            .get(&route.task_id)
            .and_then(|rounds| rounds.get(&route.round.to_string()))
            .ok_or_else(|| LlmError::MockMissing {
                task_id: route.task_id.clone(),
                round: route.round,
            })?;
        Ok(LlmResponse {
            raw_text: text.clone(),
            extracted_code: None,
            finish_reason: "mock".to_string(),
        })
    }
}
