//! Completion backends.
//!
//! The engine talks to models through [`Backend`]. Three implementations
//! ship: [`HttpBackend`] for hosted chat/completion APIs, [`ScriptedBackend`]
//! for fixture-driven runs, and the record/replay pair
//! ([`RecordingBackend`], [`ReplayBackend`]) that captures live responses to
//! a cassette and serves them offline.
//!
//! Remote usage numbers are carried in [`BackendResponse::usage`] for
//! comparison only. Token accounting always uses the engine's tokenizer.

mod http;
mod replay;
mod scripted;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use http::{HttpBackend, HttpConfig};
pub use replay::{CassetteEntry, RecordingBackend, ReplayBackend};
pub use scripted::{Script, ScriptedBackend, DEFAULT_ANNOTATION_MARKER};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeParams {
    pub top_k: u32,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            top_k: 40,
            temperature: 0.8,
            max_output_tokens: 2048,
        }
    }
}

impl DecodeParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.top_k < 1 {
            return Err("top_k must be at least 1".into());
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err("temperature must be a finite number >= 0".into());
        }
        if self.max_output_tokens < 1 {
            return Err("max_output_tokens must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendRequest {
    pub prompt: String,
    pub decode: DecodeParams,
}

impl BackendRequest {
    pub fn new(prompt: impl Into<String>, decode: DecodeParams) -> Self {
        Self {
            prompt: prompt.into(),
            decode,
        }
    }

    pub fn prompt_hash(&self) -> String {
        prompt_hash(&self.prompt)
    }
}

/// Token counts as reported by a remote service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendResponse {
    pub text: String,
    pub usage: Option<Usage>,
}

impl BackendResponse {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            usage: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response body: {0}")]
    MalformedResponse(String),
    #[error("scripted backend exhausted after {served} responses")]
    FixtureExhausted { served: usize },
    #[error("no scripted response for prompt {prompt_hash}")]
    ScriptMiss { prompt_hash: String },
    #[error("cassette has no entry for prompt {prompt_hash}")]
    CassetteMiss { prompt_hash: String },
    #[error("cassette I/O: {0}")]
    Cassette(String),
}

/// A completion service. Implementations must tolerate concurrent calls.
pub trait Backend: Send + Sync {
    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError>;
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        (**self).complete(request)
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        (**self).complete(request)
    }
}

/// Hex SHA-256 of the exact prompt bytes.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}
