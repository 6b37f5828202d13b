use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Backend, BackendError, BackendRequest, BackendResponse};
use crate::prompt::chunk_section;

pub const DEFAULT_ANNOTATION_MARKER: &str = "@revision ";

/// Where a [`ScriptedBackend`] gets its responses. Serialized as the fixture
/// file format, e.g. `{"responses": ["[]", "done"]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Script {
    /// The n-th call gets the n-th response.
    Responses(Vec<String>),
    /// Responses keyed by the hex SHA-256 of the prompt.
    ByPromptHash(HashMap<String, String>),
    /// Step prompts are answered with a JSON array of the revision objects
    /// found on lines of the chunk text that start with `marker`; prompts
    /// without a chunk section get `final_answer`.
    Annotations {
        #[serde(default = "default_marker")]
        marker: String,
        #[serde(default)]
        final_answer: String,
    },
}

fn default_marker() -> String {
    DEFAULT_ANNOTATION_MARKER.to_string()
}

/// Deterministic fixture-driven backend.
#[derive(Debug)]
pub struct ScriptedBackend {
    script: Script,
    served: Mutex<usize>,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        Self {
            script,
            served: Mutex::new(0),
        }
    }

    pub fn responses<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(Script::Responses(
            responses.into_iter().map(Into::into).collect(),
        ))
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(Self::new(serde_json::from_str(text)?))
    }

    pub fn served(&self) -> usize {
        *self.served.lock().expect("poisoned")
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let mut served = self.served.lock().expect("poisoned");
        let text = match &self.script {
            Script::Responses(list) => list
                .get(*served)
                .cloned()
                .ok_or(BackendError::FixtureExhausted { served: *served })?,
            Script::ByPromptHash(map) => {
                let hash = request.prompt_hash();
                map.get(&hash)
                    .cloned()
                    .ok_or(BackendError::ScriptMiss { prompt_hash: hash })?
            }
            Script::Annotations {
                marker,
                final_answer,
            } => match chunk_section(&request.prompt) {
                Some(chunk) => annotations(chunk, marker),
                None => final_answer.clone(),
            },
        };
        *served += 1;
        Ok(BackendResponse::text(text))
    }
}

fn annotations(chunk: &str, marker: &str) -> String {
    let items: Vec<Value> = chunk
        .lines()
        .filter_map(|l| l.trim_start().strip_prefix(marker))
        .filter_map(|rest| serde_json::from_str::<Value>(rest).ok())
        .filter(Value::is_object)
        .collect();
    serde_json::to_string(&items).expect("values serialize")
}
