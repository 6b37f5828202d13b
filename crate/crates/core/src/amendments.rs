//! Append-only memory representation.
//!
//! Instead of rewriting the value at a path, each accepted revision is
//! appended after the existing memory as a self-contained JSON line. The
//! serialized log therefore only ever grows at its end, so everything before
//! the newest change stays byte-identical from one step to the next and can
//! be served from a prefix KV cache. Later entries for a path overwrite
//! earlier ones when the log is resolved.
//!
//! Wire form (each line terminated by `\n`):
//!
//! ```text
//! {"k1":"v1","k2":"v2"}
//! {"path":"/k1","op":"update","value":"v3"}
//! ```

use serde_json::Value;
use thiserror::Error;

use crate::path::parse_path;
use crate::revision::{apply_in_place, check_against_schema, Operation, Revision, RevisionError};
use crate::schema::Schema;
use crate::value::{Memory, MemoryValue};

/// A recorded revision. Same shape as [`Revision`].
pub type AmendmentEntry = Revision;

#[derive(Debug, Clone, PartialEq)]
pub struct AmendmentLog {
    base: Memory,
    entries: Vec<AmendmentEntry>,
    resolved: Memory,
    serialized: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LogParseError {
    #[error("amendment log is empty")]
    Empty,
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("line {line}: entry does not apply: {source}")]
    Replay { line: usize, source: RevisionError },
}

impl Default for AmendmentLog {
    fn default() -> Self {
        Self::new(Memory::new())
    }
}

impl AmendmentLog {
    pub fn new(base: Memory) -> Self {
        let mut serialized = base.to_canonical_json();
        serialized.push('\n');
        Self {
            resolved: base.clone(),
            base,
            entries: Vec::new(),
            serialized,
        }
    }

    pub fn base(&self) -> &Memory {
        &self.base
    }

    pub fn entries(&self) -> &[AmendmentEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when neither the base nor any entry holds data.
    pub fn is_blank(&self) -> bool {
        self.base.is_empty() && self.entries.is_empty()
    }

    /// Validates `revision` against the resolved view and appends it.
    pub fn append(
        &self,
        revision: &Revision,
        schema: &Schema,
    ) -> Result<AmendmentLog, RevisionError> {
        check_against_schema(revision, schema)?;
        let mut next = self.clone();
        next.push_unchecked(revision.clone())?;
        Ok(next)
    }

    /// In-place variant of [`append`](Self::append) for owners of the log.
    pub fn push(&mut self, revision: &Revision, schema: &Schema) -> Result<(), RevisionError> {
        check_against_schema(revision, schema)?;
        self.push_unchecked(revision.clone())
    }

    fn push_unchecked(&mut self, revision: Revision) -> Result<(), RevisionError> {
        apply_in_place(&mut self.resolved, &revision)?;
        self.serialized.push_str(&revision.to_canonical_json());
        self.serialized.push('\n');
        self.entries.push(revision);
        Ok(())
    }

    /// The memory obtained by applying every entry to the base in order.
    pub fn resolve(&self) -> Memory {
        self.resolved.clone()
    }

    pub fn resolved(&self) -> &Memory {
        &self.resolved
    }

    /// Base line followed by one line per entry.
    pub fn serialize(&self) -> &str {
        &self.serialized
    }

    /// Rewrites the log as its resolved memory with no entries. Only
    /// meaningful between documents: it discards the cached prefix.
    pub fn compact(&self) -> AmendmentLog {
        AmendmentLog::new(self.resolve())
    }

    /// Reads a serialized log. Every entry must apply structurally to the
    /// state before it; no schema is consulted.
    pub fn parse(text: &str) -> Result<AmendmentLog, LogParseError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (first_no, first) = lines.next().ok_or(LogParseError::Empty)?;
        let base = Memory::parse_json(first).map_err(|e| LogParseError::Line {
            line: first_no + 1,
            message: e.to_string(),
        })?;
        let mut log = AmendmentLog::new(base);
        for (no, line) in lines {
            let line_no = no + 1;
            let entry = parse_entry(line).map_err(|message| LogParseError::Line {
                line: line_no,
                message,
            })?;
            log.push_unchecked(entry)
                .map_err(|source| LogParseError::Replay {
                    line: line_no,
                    source,
                })?;
        }
        Ok(log)
    }
}

/// Parses one `{"path","op","value"}` object.
pub(crate) fn entry_from_json(value: &Value) -> Result<Revision, String> {
    let obj = value.as_object().ok_or("revision must be a JSON object")?;
    let path = obj
        .get("path")
        .and_then(Value::as_str)
        .ok_or("revision needs a string `path`")?;
    let path = parse_path(path).map_err(|e| e.to_string())?;
    let op = obj
        .get("op")
        .and_then(Value::as_str)
        .ok_or("revision needs a string `op`")?;
    let op: Operation = op.parse()?;
    let value = obj.get("value").ok_or("revision needs a `value`")?;
    let value = MemoryValue::from_json(value).map_err(|e| e.to_string())?;
    if let Some(extra) = obj
        .keys()
        .find(|k| !matches!(k.as_str(), "path" | "op" | "value"))
    {
        return Err(format!("unexpected key `{extra}` in revision"));
    }
    Ok(Revision { path, op, value })
}

fn parse_entry(line: &str) -> Result<Revision, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    entry_from_json(&value)
}
