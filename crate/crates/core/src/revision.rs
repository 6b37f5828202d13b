//! Path-addressed memory revisions and their in-place application.

use std::fmt;
use std::str::FromStr;

use serde_json::{json, Value};
use thiserror::Error;

use crate::path::{Path, Segment};
use crate::schema::{validate_at, Schema, Violation};
use crate::value::{Memory, MemoryValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operation {
    Add,
    Update,
}

impl Operation {
    pub fn as_str(self) -> &'static str {
        match self {
            Operation::Add => "add",
            Operation::Update => "update",
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Operation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "add" => Ok(Operation::Add),
            "update" => Ok(Operation::Update),
            other => Err(format!("unknown operation `{other}`")),
        }
    }
}

/// A proposed change `(path, operation, value)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Revision {
    pub path: Path,
    pub op: Operation,
    pub value: MemoryValue,
}

impl Revision {
    pub fn add(path: Path, value: impl Into<MemoryValue>) -> Self {
        Self {
            path,
            op: Operation::Add,
            value: value.into(),
        }
    }

    pub fn update(path: Path, value: impl Into<MemoryValue>) -> Self {
        Self {
            path,
            op: Operation::Update,
            value: value.into(),
        }
    }

    /// `{"path":...,"op":...,"value":...}` in canonical key order.
    pub fn to_json(&self) -> Value {
        json!({
            "path": self.path.to_string(),
            "op": self.op.as_str(),
            "value": self.value.to_json(),
        })
    }

    /// Canonical single-line JSON object.
    pub fn to_canonical_json(&self) -> String {
        let mut out = String::from("{\"path\":");
        crate::value::write_json_string(&self.path.to_string(), &mut out);
        out.push_str(",\"op\":\"");
        out.push_str(self.op.as_str());
        out.push_str("\",\"value\":");
        self.value.write_canonical(&mut out);
        out.push('}');
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RevisionError {
    #[error("update target {0} does not exist")]
    PathNotFound(Path),
    #[error("add target {0} already exists")]
    PathAlreadyExists(Path),
    #[error("parent of {0} does not exist")]
    ParentMissing(Path),
    #[error("schema violation for {path}: {violation}")]
    SchemaViolation { path: Path, violation: Violation },
    #[error("{path}: {message}")]
    SchemaPath { path: Path, message: String },
    #[error("list index out of range at {path} (list length {len})")]
    IndexOutOfRange { path: Path, len: usize },
}

/// What [`resolve_path`] finds at a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lookup<'a> {
    Found(&'a MemoryValue),
    Absent,
}

impl<'a> Lookup<'a> {
    pub fn value(self) -> Option<&'a MemoryValue> {
        match self {
            Lookup::Found(v) => Some(v),
            Lookup::Absent => None,
        }
    }
}

fn child<'a>(container: &'a MemoryValue, seg: &Segment) -> Option<&'a MemoryValue> {
    match container {
        MemoryValue::Map(m) => m.get(seg.as_str()),
        MemoryValue::List(l) => seg.as_index().and_then(|i| l.get(i)),
        _ => None,
    }
}

fn child_mut<'a>(container: &'a mut MemoryValue, seg: &Segment) -> Option<&'a mut MemoryValue> {
    match container {
        MemoryValue::Map(m) => m.get_mut(seg.as_str()),
        MemoryValue::List(l) => seg.as_index().and_then(move |i| l.get_mut(i)),
        _ => None,
    }
}

/// Looks up the value at `path`; absence is a result, not an error.
pub fn resolve_path<'a>(memory: &'a Memory, path: &Path) -> Lookup<'a> {
    let segs = path.segments();
    let Some(mut node) = memory.root().get(segs[0].as_str()) else {
        return Lookup::Absent;
    };
    for seg in &segs[1..] {
        match child(node, seg) {
            Some(next) => node = next,
            None => return Lookup::Absent,
        }
    }
    Lookup::Found(node)
}

/// Applies a validated revision, returning the next memory.
///
/// `update` replaces the whole subtree at the path. `add` creates a new map
/// entry under an existing parent, or appends to a list when the final
/// segment equals the list length. The input memory is left untouched.
pub fn apply_revision(
    memory: &Memory,
    revision: &Revision,
    schema: &Schema,
) -> Result<Memory, RevisionError> {
    check_against_schema(revision, schema)?;
    let mut next = memory.clone();
    apply_in_place(&mut next, revision)?;
    Ok(next)
}

pub(crate) fn check_against_schema(
    revision: &Revision,
    schema: &Schema,
) -> Result<(), RevisionError> {
    let path = &revision.path;
    let node = schema
        .node_at(path.segments())
        .ok_or_else(|| RevisionError::SchemaPath {
            path: path.clone(),
            message: "path is not allowed by the schema".into(),
        })?;
    let mut location = path.segments().to_vec();
    validate_at(&revision.value, node, &mut location).map_err(|violation| {
        RevisionError::SchemaViolation {
            path: path.clone(),
            violation,
        }
    })
}

/// Structural application without schema checks. Mutates `memory` only on
/// success.
pub(crate) fn apply_in_place(
    memory: &mut Memory,
    revision: &Revision,
) -> Result<(), RevisionError> {
    let path = &revision.path;
    let segs = path.segments();
    let last = path.last();

    if segs.len() == 1 {
        let root = memory.root_mut();
        return match (revision.op, root.get_mut(last.as_str())) {
            (Operation::Update, Some(slot)) => {
                *slot = revision.value.clone();
                Ok(())
            }
            (Operation::Update, None) => Err(RevisionError::PathNotFound(path.clone())),
            (Operation::Add, Some(_)) => Err(RevisionError::PathAlreadyExists(path.clone())),
            (Operation::Add, None) => {
                root.insert(last.as_str().to_string(), revision.value.clone());
                Ok(())
            }
        };
    }

    let mut parent = memory
        .root_mut()
        .get_mut(segs[0].as_str())
        .ok_or_else(|| missing(revision))?;
    for seg in &segs[1..segs.len() - 1] {
        parent = child_mut(parent, seg).ok_or_else(|| missing(revision))?;
    }

    match parent {
        MemoryValue::Map(m) => match (revision.op, m.get_mut(last.as_str())) {
            (Operation::Update, Some(slot)) => {
                *slot = revision.value.clone();
                Ok(())
            }
            (Operation::Update, None) => Err(RevisionError::PathNotFound(path.clone())),
            (Operation::Add, Some(_)) => Err(RevisionError::PathAlreadyExists(path.clone())),
            (Operation::Add, None) => {
                m.insert(last.as_str().to_string(), revision.value.clone());
                Ok(())
            }
        },
        MemoryValue::List(l) => {
            let len = l.len();
            let Some(index) = last.as_index() else {
                return Err(match revision.op {
                    Operation::Update => RevisionError::PathNotFound(path.clone()),
                    Operation::Add => RevisionError::IndexOutOfRange {
                        path: path.clone(),
                        len,
                    },
                });
            };
            match revision.op {
                Operation::Update if index < len => {
                    l[index] = revision.value.clone();
                    Ok(())
                }
                Operation::Add if index == len => {
                    l.push(revision.value.clone());
                    Ok(())
                }
                Operation::Add if index < len => {
                    Err(RevisionError::PathAlreadyExists(path.clone()))
                }
                _ => Err(RevisionError::IndexOutOfRange {
                    path: path.clone(),
                    len,
                }),
            }
        }
        // A primitive parent has no children to add or update.
        _ => Err(match revision.op {
            Operation::Update => RevisionError::PathNotFound(path.clone()),
            Operation::Add => RevisionError::ParentMissing(path.clone()),
        }),
    }
}

fn missing(revision: &Revision) -> RevisionError {
    match revision.op {
        Operation::Update => RevisionError::PathNotFound(revision.path.clone()),
        Operation::Add => RevisionError::ParentMissing(revision.path.clone()),
    }
}
