//! Minimal chat-completion client.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

pub const DEFAULT_KEY_ENV: &str = "PHOTOSCOUT_LLM_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EndpointError {
    #[error("environment variable {0} is not set")]
    MissingKey(String),
    #[error("request timed out")]
    Timeout,
    #[error("endpoint answered with status {0}")]
    Status(u16),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    /// Base URL; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model: String,
    pub key_env: String,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
    pub temperature: f64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-3.5-turbo".into(),
            key_env: DEFAULT_KEY_ENV.into(),
            timeout_secs: 10,
            max_in_flight: 4,
            temperature: 1.0,
        }
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

/// Splits `total` samples over at most `lanes` requests, larger shares first.
pub fn split_samples(total: usize, lanes: usize) -> Vec<usize> {
    let lanes = lanes.clamp(1, total.max(1));
    (0..lanes)
        .map(|i| total / lanes + usize::from(i < total % lanes))
        .filter(|n| *n > 0)
        .collect()
}

/// The program line of one completion, without code fences or an `Output:`
/// prefix.
pub fn extract_program(content: &str) -> String {
    let line = content
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with("```"))
        .unwrap_or("");
    let line = line.strip_prefix("Output:").unwrap_or(line).trim();
    line.trim_matches('`').trim().to_owned()
}

impl LlmConfig {
    fn key(&self) -> Result<String, EndpointError> {
        std::env::var(&self.key_env).map_err(|_| EndpointError::MissingKey(self.key_env.clone()))
    }

    fn request(&self, client: &reqwest::blocking::Client, key: &str, prompt: &str, n: usize) -> Result<Vec<String>, EndpointError> {
        let url = format!("{}/chat/completions", self.base_url.trim_end_matches('/'));
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "n": n,
            "temperature": self.temperature,
        });
        let response = client.post(url).bearer_auth(key).json(&body).send().map_err(|e| {
            if e.is_timeout() {
                EndpointError::Timeout
            } else {
                EndpointError::Transport(e.to_string())
            }
        })?;
        let status = response.status();
        if !status.is_success() {
            return Err(EndpointError::Status(status.as_u16()));
        }
        let parsed: ChatResponse = response.json().map_err(|e| {
            if e.is_timeout() {
                EndpointError::Timeout
            } else {
                EndpointError::Malformed(e.to_string())
            }
        })?;
        Ok(parsed
            .choices
            .into_iter()
            .filter_map(|c| c.message.content)
            .collect())
    }

    /// Requests `samples` completions of `prompt`, spread over concurrent
    /// requests. Results keep request order.
    pub fn complete(&self, prompt: &str, samples: usize) -> Result<Vec<String>, EndpointError> {
        let key = self.key()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(self.timeout_secs))
            .build()
            .map_err(|e| EndpointError::Transport(e.to_string()))?;
        let shares = split_samples(samples, self.max_in_flight);
        let results: Vec<Result<Vec<String>, EndpointError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = shares
                .iter()
                .map(|&n| {
                    let (client, key) = (&client, &key);
                    scope.spawn(move || self.request(client, key, prompt, n))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(EndpointError::Transport("request thread panicked".into()))))
                .collect()
        });
        let mut out = Vec::with_capacity(samples);
        for r in results {
            out.extend(r?);
        }
        Ok(out)
    }
}
