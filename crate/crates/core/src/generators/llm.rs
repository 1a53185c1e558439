use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::BackendError;

/// Connection settings for an OpenAI-compatible chat-completion server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmEndpointConfig {
    pub base_url: String,
    pub model_name: String,
    /// Sampling temperature for equation proposals.
    pub temperature: f64,
    /// Sampling temperature for equation analysis.
    pub analysis_temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: f64,
    pub retries: u32,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub max_concurrent_requests: usize,
    /// First backoff delay; doubles on every retry.
    pub backoff_base_ms: u64,
}

impl Default for LlmEndpointConfig {
    fn default() -> Self {
        LlmEndpointConfig {
            base_url: "http://localhost:8000".into(),
            model_name: "mixtral:8x7b".into(),
            temperature: 0.8,
            analysis_temperature: 0.3,
            max_tokens: 512,
            timeout_secs: 60.0,
            retries: 3,
            api_key_env: "LLM_API_KEY".into(),
            max_concurrent_requests: 4,
            backoff_base_ms: 1000,
        }
    }
}

impl LlmEndpointConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        let bad = |m: String| Err(BackendError::Config(m));
        for (name, t) in [("temperature", self.temperature), ("analysis_temperature", self.analysis_temperature)] {
            if !(0.0..=2.0).contains(&t) {
                return bad(format!("{name} {t} outside [0, 2]"));
            }
        }
        if self.max_tokens == 0 {
            return bad("max_tokens must be positive".into());
        }
        if !(self.timeout_secs > 0.0) || !self.timeout_secs.is_finite() {
            return bad("timeout must be positive".into());
        }
        if self.retries > 5 {
            return bad(format!("retries {} exceeds 5", self.retries));
        }
        if self.max_concurrent_requests == 0 {
            return bad("max_concurrent_requests must be positive".into());
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return bad(format!("base_url `{}` is not an http(s) URL", self.base_url));
        }
        Ok(())
    }

    fn endpoint(&self) -> String {
        format!("{}/v1/chat/completions", self.base_url.trim_end_matches('/'))
    }

    fn api_key(&self) -> Option<String> {
        std::env::var(&self.api_key_env).ok().filter(|k| !k.is_empty())
    }
}

enum Attempt {
    Retryable(String),
    Fatal(BackendError),
}

fn attempt_once(agent: &ureq::Agent, cfg: &LlmEndpointConfig, body: &str) -> Result<String, Attempt> {
    let mut req = agent.post(cfg.endpoint()).header("Content-Type", "application/json");
    if let Some(key) = cfg.api_key() {
        req = req.header("Authorization", format!("Bearer {key}"));
    }
    let mut resp = req.send(body).map_err(|e| Attempt::Retryable(e.to_string()))?;
    let status = resp.status().as_u16();
    if status >= 500 || status == 429 || status == 408 {
        return Err(Attempt::Retryable(format!("HTTP {status}")));
    }
    if status >= 400 {
        return Err(Attempt::Fatal(BackendError::HttpStatus(status)));
    }
    let text = resp
        .body_mut()
        .read_to_string()
        .map_err(|e| Attempt::Retryable(e.to_string()))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| Attempt::Fatal(BackendError::Protocol(format!("response is not JSON: {e}"))))?;
    let content = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .unwrap_or("");
    if content.trim().is_empty() {
        return Err(Attempt::Fatal(BackendError::EmptyCompletion));
    }
    Ok(content.to_string())
}

/// Sends one chat-completion request and returns the assistant text,
/// retrying transport failures and 5xx responses with exponential backoff.
pub fn llm_complete(cfg: &LlmEndpointConfig, prompt: &str, temperature: f64) -> Result<String, BackendError> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_secs)))
        .http_status_as_error(false)
        .build()
        .into();
    let body = json!({
        "model": cfg.model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": temperature,
        "max_tokens": cfg.max_tokens,
    })
    .to_string();

    let attempts = cfg.retries + 1;
    let mut last = String::new();
    for i in 0..attempts {
        if i > 0 {
            let delay = cfg.backoff_base_ms.saturating_mul(1u64 << (i - 1).min(20));
            log::debug!("retrying chat completion in {delay} ms after: {last}");
            thread::sleep(Duration::from_millis(delay));
        }
        match attempt_once(&agent, cfg, &body) {
            Ok(text) => return Ok(text),
            Err(Attempt::Fatal(e)) => return Err(e),
            Err(Attempt::Retryable(msg)) => last = msg,
        }
    }
    Err(BackendError::Transport {
        attempts,
        message: last,
    })
}

/// Counting semaphore limiting concurrent requests.
#[derive(Debug)]
pub struct RequestGate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl RequestGate {
    pub fn new(permits: usize) -> Self {
        RequestGate {
            free: Mutex::new(permits.max(1)),
            cv: Condvar::new(),
        }
    }

    pub fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        {
            let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
            while *free == 0 {
                free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
            }
            *free -= 1;
        }
        struct Release<'a>(&'a RequestGate);
        impl Drop for Release<'_> {
            fn drop(&mut self) {
                *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
                self.0.cv.notify_one();
            }
        }
        let _release = Release(self);
        f()
    }
}

/// Shared client: endpoint settings plus the concurrency gate.
#[derive(Debug)]
pub struct LlmClient {
    pub cfg: LlmEndpointConfig,
    gate: RequestGate,
}

impl LlmClient {
    pub fn new(cfg: LlmEndpointConfig) -> Result<Self, BackendError> {
        cfg.validate()?;
        let gate = RequestGate::new(cfg.max_concurrent_requests);
        Ok(LlmClient { cfg, gate })
    }

    pub fn complete(&self, prompt: &str, temperature: f64) -> Result<String, BackendError> {
        self.gate.run(|| llm_complete(&self.cfg, prompt, temperature))
    }
}
