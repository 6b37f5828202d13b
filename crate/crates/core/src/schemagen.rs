//! Few-shot schema generation.

use thiserror::Error;

use crate::backend::{Backend, BackendError, BackendRequest, DecodeParams};
use crate::bundled::{self, Exemplar};
use crate::schema::{parse_dataclass, Schema};

#[derive(Debug, Clone, PartialEq)]
pub struct SchemaGenRequest {
    pub domain_description: String,
    pub example_query: String,
    pub exemplars: Vec<Exemplar>,
}

impl SchemaGenRequest {
    /// A request using the bundled exemplars.
    pub fn new(domain_description: impl Into<String>, example_query: impl Into<String>) -> Self {
        Self {
            domain_description: domain_description.into(),
            example_query: example_query.into(),
            exemplars: bundled::exemplars(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemaGenOutcome {
    pub schema: Schema,
    pub attempts: u32,
    pub raw_output: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemaGenError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no parseable schema after {attempts} attempts; last error: {last_error}")]
    GenerationUnparseable {
        attempts: u32,
        last_error: String,
        last_output: String,
    },
    #[error("backend failure: {0}")]
    BackendFailure(#[from] BackendError),
}

const INSTRUCTIONS: &str = "\
Design a memory schema for a reader that goes through a long input one chunk at a time and keeps structured notes for answering a question at the end.
Write the schema as Python dataclasses. Declare nested dataclasses inside the class that uses them.
Field types may be str, int, float, bool, list[T] and dict[str, T].
Use docstrings to tell the reader what belongs in each field.
";

/// The generation prompt before any retry feedback.
pub fn build_prompt(request: &SchemaGenRequest) -> String {
    let mut out = String::from("[TASK]\n");
    out.push_str(INSTRUCTIONS);
    for (i, ex) in request.exemplars.iter().enumerate() {
        out.push_str(&format!(
            "\n[EXAMPLE {}]\nDomain: {}\nExample query: {}\nSchema:\n```python\n{}```\n",
            i + 1,
            ex.description.trim(),
            ex.example_query.trim(),
            ex.schema.render()
        ));
    }
    out.push_str(&format!(
        "\n[NEW DOMAIN]\nDomain: {}\nExample query: {}\nSchema:\n",
        request.domain_description.trim(),
        request.example_query.trim()
    ));
    out
}

fn feedback(base: &str, output: &str, error: &str) -> String {
    format!("{base}{output}\n\n[PARSE ERROR]\n{error}\nWrite the corrected schema.\nSchema:\n")
}

/// Pulls the dataclass declaration out of a model response: the first
/// fenced block that declares a class, else everything from the first
/// decorator or class line.
pub fn extract_declaration(output: &str) -> &str {
    let declares = |s: &str| {
        s.lines()
            .any(|l| l.trim_start().starts_with("class ") || l.contains("= dict["))
    };
    if output.contains("```") {
        for block in output.split("```").skip(1).step_by(2) {
            let body = match block.split_once('\n') {
                Some((tag, rest)) if !tag.trim().contains(' ') => rest,
                _ => block,
            };
            if declares(body) {
                return body;
            }
        }
    }
    let mut offset = 0;
    for line in output.split_inclusive('\n') {
        let t = line.trim_start();
        if t.starts_with('@') || t.starts_with("class ") {
            return &output[offset..];
        }
        offset += line.len();
    }
    output
}

/// Asks the backend for a schema, retrying with the parse error appended
/// up to `retry_limit` times.
pub fn generate_schema(
    request: &SchemaGenRequest,
    backend: &dyn Backend,
    decode: DecodeParams,
    retry_limit: u32,
) -> Result<SchemaGenOutcome, SchemaGenError> {
    if request.domain_description.trim().is_empty() {
        return Err(SchemaGenError::InvalidRequest(
            "domain description is empty".into(),
        ));
    }
    if request.exemplars.is_empty() {
        return Err(SchemaGenError::InvalidRequest(
            "at least one exemplar is required".into(),
        ));
    }
    let base = build_prompt(request);
    let mut prompt = base.clone();
    let mut last = (String::new(), String::new());
    for attempt in 1..=retry_limit + 1 {
        let response = backend.complete(&BackendRequest::new(prompt.clone(), decode))?;
        match parse_dataclass(extract_declaration(&response.text)) {
            Ok(schema) => {
                return Ok(SchemaGenOutcome {
                    schema,
                    attempts: attempt,
                    raw_output: response.text,
                })
            }
            Err(e) => {
                prompt = feedback(&base, &response.text, &e.to_string());
                last = (e.to_string(), response.text);
            }
        }
    }
    Err(SchemaGenError::GenerationUnparseable {
        attempts: retry_limit + 1,
        last_error: last.0,
        last_output: last.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ScriptedBackend;

    const FUNCTION_MATCH: &str =
        "@dataclasses.dataclass\nclass FunctionMatch:\n  matches: dict[str, float]\n";

    #[test]
    fn extracts_fenced_and_bare() {
        let fenced = format!("Here is a schema.\n```python\n{FUNCTION_MATCH}```\nHope it helps.");
        assert_eq!(extract_declaration(&fenced), FUNCTION_MATCH);
        let bare = format!("Sure:\n{FUNCTION_MATCH}");
        assert_eq!(extract_declaration(&bare), FUNCTION_MATCH);
        assert_eq!(extract_declaration("nothing"), "nothing");
    }

    #[test]
    fn prompt_lists_exemplars_in_order() {
        let p = build_prompt(&SchemaGenRequest::new(
            "Legal contracts.",
            "Who are the parties?",
        ));
        let a = p.find("class BookSummary").unwrap();
        let b = p.find("class FunctionNaturalDescriptor").unwrap();
        let c = p.find("class RelevantTableInfo").unwrap();
        assert!(a < b && b < c);
        assert!(
            p.ends_with("Domain: Legal contracts.\nExample query: Who are the parties?\nSchema:\n")
        );
    }

    #[test]
    fn retries_until_parseable() {
        let backend = ScriptedBackend::responses([
            "not a schema",
            "class Broken:\n  x: tuple[int]\n",
            FUNCTION_MATCH,
        ]);
        let req = SchemaGenRequest::new("Code search.", "Which function sorts?");
        let out = generate_schema(&req, &backend, DecodeParams::default(), 2).unwrap();
        assert_eq!(out.attempts, 3);
        assert_eq!(out.schema.name(), "FunctionMatch");

        let backend = ScriptedBackend::responses(["no", "still no"]);
        let err = generate_schema(&req, &backend, DecodeParams::default(), 1).unwrap_err();
        assert!(matches!(
            err,
            SchemaGenError::GenerationUnparseable { attempts: 2, .. }
        ));

        let backend = ScriptedBackend::responses(Vec::<String>::new());
        let err = generate_schema(&req, &backend, DecodeParams::default(), 1).unwrap_err();
        assert!(matches!(
            err,
            SchemaGenError::BackendFailure(BackendError::FixtureExhausted { .. })
        ));
    }

    #[test]
    fn rejects_bad_requests() {
        let backend = ScriptedBackend::responses([FUNCTION_MATCH]);
        let mut req = SchemaGenRequest::new(" ", "q");
        assert!(matches!(
            generate_schema(&req, &backend, DecodeParams::default(), 0),
            Err(SchemaGenError::InvalidRequest(_))
        ));
        req.domain_description = "d".into();
        req.exemplars.clear();
        assert!(matches!(
            generate_schema(&req, &backend, DecodeParams::default(), 0),
            Err(SchemaGenError::InvalidRequest(_))
        ));
    }
}
