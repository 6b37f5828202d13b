use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, BackendRequest, BackendResponse, Usage};

/// One cassette line. `usage` is written only when the live service
/// reported it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub prompt_hash: String,
    pub response_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
}

/// Forwards to a live backend and appends every response to a JSON Lines
/// cassette.
pub struct RecordingBackend<B> {
    inner: B,
    out: Mutex<File>,
}

impl<B: Backend> RecordingBackend<B> {
    /// Truncates `path` and records into it.
    pub fn create(inner: B, path: &Path) -> Result<Self, BackendError> {
        let file = File::create(path).map_err(|e| BackendError::Cassette(e.to_string()))?;
        Ok(Self {
            inner,
            out: Mutex::new(file),
        })
    }

    /// Appends to an existing cassette.
    pub fn append(inner: B, path: &Path) -> Result<Self, BackendError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| BackendError::Cassette(e.to_string()))?;
        Ok(Self {
            inner,
            out: Mutex::new(file),
        })
    }
}

impl<B: Backend> Backend for RecordingBackend<B> {
    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let response = self.inner.complete(request)?;
        let entry = CassetteEntry {
            prompt_hash: request.prompt_hash(),
            response_text: response.text.clone(),
            usage: response.usage,
        };
        let mut line = serde_json::to_string(&entry).expect("entry serializes");
        line.push('\n');
        let mut out = self.out.lock().expect("poisoned");
        out.write_all(line.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| BackendError::Cassette(e.to_string()))?;
        Ok(response)
    }
}

/// Serves recorded responses by prompt hash. Repeated prompts get their
/// recorded responses in order; once those run out the last one repeats.
#[derive(Debug)]
pub struct ReplayBackend {
    entries: HashMap<String, Vec<(String, Option<Usage>)>>,
    cursors: Mutex<HashMap<String, usize>>,
}

impl ReplayBackend {
    pub fn parse(text: &str) -> Result<Self, BackendError> {
        let mut entries: HashMap<String, Vec<(String, Option<Usage>)>> = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: CassetteEntry = serde_json::from_str(line)
                .map_err(|e| BackendError::Cassette(format!("line {}: {e}", i + 1)))?;
            entries
                .entry(entry.prompt_hash)
                .or_default()
                .push((entry.response_text, entry.usage));
        }
        Ok(Self {
            entries,
            cursors: Mutex::new(HashMap::new()),
        })
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Cassette(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

impl Backend for ReplayBackend {
    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let hash = request.prompt_hash();
        let texts = self
            .entries
            .get(&hash)
            .ok_or_else(|| BackendError::CassetteMiss {
                prompt_hash: hash.clone(),
            })?;
        let mut cursors = self.cursors.lock().expect("poisoned");
        let cursor = cursors.entry(hash).or_insert(0);
        let (text, usage) = texts[(*cursor).min(texts.len() - 1)].clone();
        *cursor += 1;
        Ok(BackendResponse { text, usage })
    }
}
