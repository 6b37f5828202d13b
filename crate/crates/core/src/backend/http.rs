use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Backend, BackendError, BackendRequest, BackendResponse, Usage};

pub const API_KEY_ENV: &str = "STRUCTMEM_API_KEY";

/// Settings for [`HttpBackend`]. The API key is never read from or written
/// to config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub timeout_secs: u64,
    #[serde(skip)]
    pub api_key: Option<String>,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            model: String::new(),
            max_retries: 3,
            initial_backoff_ms: 500,
            timeout_secs: 120,
            api_key: None,
        }
    }
}

impl HttpConfig {
    /// Takes the API key from the environment.
    pub fn apply_env(&mut self) {
        self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
    }
}

/// Client for OpenAI-style chat completion endpoints. Responses in the
/// `candidates[].content.parts[].text` shape are understood as well.
#[derive(Debug)]
pub struct HttpBackend {
    config: HttpConfig,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, BackendError> {
        if config.endpoint.is_empty() {
            return Err(BackendError::InvalidRequest(
                "no endpoint configured".into(),
            ));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self { config, client })
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn body(&self, request: &BackendRequest) -> Value {
        let mut body = json!({
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.decode.temperature,
            "top_k": request.decode.top_k,
            "max_tokens": request.decode.max_output_tokens,
        });
        if !self.config.model.is_empty() {
            body["model"] = Value::String(self.config.model.clone());
        }
        body
    }

    fn attempt(&self, body: &Value) -> Result<BackendResponse, BackendError> {
        let mut req = self.client.post(&self.config.endpoint).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(BackendError::Status {
                status: status.as_u16(),
                body: truncate(&text, 512),
            });
        }
        parse_response(&text)
    }
}

fn retryable(err: &BackendError) -> bool {
    match err {
        BackendError::Transport(_) => true,
        BackendError::Status { status, .. } => *status == 429 || *status >= 500,
        _ => false,
    }
}

impl Backend for HttpBackend {
    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        request
            .decode
            .validate()
            .map_err(BackendError::InvalidRequest)?;
        let body = self.body(request);
        let mut delay = Duration::from_millis(self.config.initial_backoff_ms);
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Err(e) if retryable(&e) && attempt < self.config.max_retries => {
                    thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

fn truncate(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_string(),
    }
}

/// Extracts the first candidate's text and any reported usage.
pub(crate) fn parse_response(body: &str) -> Result<BackendResponse, BackendError> {
    let v: Value =
        serde_json::from_str(body).map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
    let text = if let Some(choice) = v.get("choices").and_then(|c| c.get(0)) {
        choice
            .pointer("/message/content")
            .or_else(|| choice.get("text"))
            .and_then(Value::as_str)
            .map(str::to_string)
    } else if let Some(parts) = v
        .pointer("/candidates/0/content/parts")
        .and_then(Value::as_array)
    {
        let texts: Vec<&str> = parts
            .iter()
            .filter_map(|p| p.get("text")?.as_str())
            .collect();
        (!texts.is_empty()).then(|| texts.concat())
    } else {
        None
    };
    let text = text.ok_or_else(|| BackendError::MalformedResponse("no candidate text".into()))?;

    let num = |p: &str| v.pointer(p).and_then(Value::as_u64);
    let usage = match (num("/usage/prompt_tokens"), num("/usage/completion_tokens")) {
        (Some(p), Some(o)) => Some(Usage {
            prompt_tokens: p,
            output_tokens: o,
        }),
        _ => match (
            num("/usageMetadata/promptTokenCount"),
            num("/usageMetadata/candidatesTokenCount"),
        ) {
            (Some(p), Some(o)) => Some(Usage {
                prompt_tokens: p,
                output_tokens: o,
            }),
            _ => None,
        },
    };
    Ok(BackendResponse { text, usage })
}
