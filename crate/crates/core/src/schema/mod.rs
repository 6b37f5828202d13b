//! Typed hierarchical schemas.
//!
//! A [`Schema`] constrains the shape of a memory. It is stored as a JSON
//! descriptor (`.schema.json`) and shown to the model as a dataclass-style
//! rendering (see [`render_for_prompt`]). Doc strings never affect
//! validation but are preserved byte for byte.

mod dataclass;
mod descriptor;

use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::path::Segment;
use crate::value::{Memory, MemoryValue};

pub use dataclass::{parse_dataclass, render_for_prompt};
pub use descriptor::parse_schema;

/// A node of the schema tree.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemaNode {
    Integer,
    Float,
    String,
    Boolean,
    List(Box<SchemaNode>),
    /// String-keyed map with uniform values.
    Map(Box<SchemaNode>),
    Record(Record),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub name: String,
    pub doc: String,
    pub fields: Vec<Field>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub name: String,
    pub node: SchemaNode,
    /// Single-line note rendered as a trailing comment; may be empty.
    pub doc: String,
}

impl Record {
    pub fn field(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.name == name)
    }
}

impl SchemaNode {
    pub fn kind(&self) -> &'static str {
        match self {
            SchemaNode::Integer => "integer",
            SchemaNode::Float => "float",
            SchemaNode::String => "string",
            SchemaNode::Boolean => "boolean",
            SchemaNode::List(_) => "list",
            SchemaNode::Map(_) => "map",
            SchemaNode::Record(_) => "record",
        }
    }

    pub fn list(items: SchemaNode) -> Self {
        SchemaNode::List(Box::new(items))
    }

    pub fn map(values: SchemaNode) -> Self {
        SchemaNode::Map(Box::new(values))
    }

    /// The node a child segment of a value of this node must conform to.
    pub fn child(&self, segment: &Segment) -> Option<&SchemaNode> {
        match self {
            SchemaNode::Record(r) => r.field(segment.as_str()).map(|f| &f.node),
            SchemaNode::Map(values) => Some(values),
            SchemaNode::List(items) => segment.as_index().map(|_| items.as_ref()),
            _ => None,
        }
    }
}

/// Errors from reading a schema document.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("schema syntax error at {location}: {message}")]
    Syntax { location: String, message: String },
    #[error("duplicate field `{field}` in `{record}` at {location}")]
    DuplicateField {
        record: String,
        field: String,
        location: String,
    },
    #[error("unknown type name `{name}` at {location}")]
    UnknownTypeName { name: String, location: String },
    #[error("type name `{name}` is declared with two different shapes")]
    ConflictingTypeName { name: String },
    #[error("type `{name}` refers to itself")]
    RecursiveType { name: String },
    #[error("schema root must be a record or a map, found {0}")]
    InvalidRoot(&'static str),
}

/// A memory schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    name: String,
    doc: String,
    root: SchemaNode,
}

impl Schema {
    /// Builds a schema. A record root takes the schema's name and doc.
    pub fn new(
        name: impl Into<String>,
        doc: impl Into<String>,
        root: SchemaNode,
    ) -> Result<Self, SchemaError> {
        let name = name.into();
        let doc = doc.into();
        let root = match root {
            SchemaNode::Record(mut r) => {
                r.name = name.clone();
                r.doc = doc.clone();
                SchemaNode::Record(r)
            }
            SchemaNode::Map(v) => SchemaNode::Map(v),
            other => return Err(SchemaError::InvalidRoot(other.kind())),
        };
        let schema = Self { name, doc, root };
        dataclass::check_type_names(&schema)?;
        Ok(schema)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn doc(&self) -> &str {
        &self.doc
    }

    pub fn root(&self) -> &SchemaNode {
        &self.root
    }

    /// Node governing the value at `segments`, if the path is allowed.
    pub fn node_at(&self, segments: &[Segment]) -> Option<&SchemaNode> {
        let mut node = &self.root;
        for seg in segments {
            node = node.child(seg)?;
        }
        Some(node)
    }

    pub fn render(&self) -> String {
        render_for_prompt(self)
    }

    /// Pretty-printed `.schema.json` text, newline-terminated.
    pub fn to_descriptor_string(&self) -> String {
        descriptor::to_descriptor_string(self)
    }

    /// Hex SHA-256 of the compact descriptor.
    pub fn content_hash(&self) -> String {
        let compact =
            serde_json::to_string(&descriptor::to_descriptor(self)).expect("descriptor serializes");
        hex::encode(Sha256::digest(compact.as_bytes()))
    }

    /// Checks a whole memory. Fields of a record root may be absent so the
    /// memory can start empty and grow one field at a time.
    pub fn validate_memory(&self, memory: &Memory) -> Result<(), Violation> {
        let mut path = Vec::new();
        match &self.root {
            SchemaNode::Record(r) => {
                for (key, value) in memory.root() {
                    path.push(Segment::key(key.as_str()));
                    match r.field(key) {
                        Some(f) => validate_at(value, &f.node, &mut path)?,
                        None => {
                            return Err(Violation {
                                path,
                                kind: ViolationKind::UnknownField(key.clone()),
                            })
                        }
                    }
                    path.pop();
                }
                Ok(())
            }
            node => validate_at(&memory.to_value(), node, &mut path),
        }
    }
}

/// Why a value does not conform to a node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    TypeMismatch {
        expected: &'static str,
        found: &'static str,
    },
    MissingField(String),
    UnknownField(String),
}

/// The deepest offending location found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: Vec<Segment>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = match crate::path::Path::new(self.path.clone()) {
            Some(p) => p.to_string(),
            None => "/".to_string(),
        };
        match &self.kind {
            ViolationKind::TypeMismatch { expected, found } => {
                write!(f, "at {at}: expected {expected}, found {found}")
            }
            ViolationKind::MissingField(name) => write!(f, "at {at}: missing field `{name}`"),
            ViolationKind::UnknownField(name) => write!(f, "at {at}: unknown field `{name}`"),
        }
    }
}

impl std::error::Error for Violation {}

/// Checks that `value` has the shape described by `node`.
///
/// Integers are accepted where a float is expected.
pub fn validate(value: &MemoryValue, node: &SchemaNode) -> Result<(), Violation> {
    validate_at(value, node, &mut Vec::new())
}

pub(crate) fn validate_at(
    value: &MemoryValue,
    node: &SchemaNode,
    path: &mut Vec<Segment>,
) -> Result<(), Violation> {
    let mismatch = |path: &Vec<Segment>| Violation {
        path: path.clone(),
        kind: ViolationKind::TypeMismatch {
            expected: node.kind(),
            found: value.kind(),
        },
    };
    match (node, value) {
        (SchemaNode::Integer, MemoryValue::Integer(_))
        | (SchemaNode::Float, MemoryValue::Float(_) | MemoryValue::Integer(_))
        | (SchemaNode::String, MemoryValue::String(_))
        | (SchemaNode::Boolean, MemoryValue::Boolean(_)) => Ok(()),
        (SchemaNode::List(items), MemoryValue::List(values)) => {
            for (i, v) in values.iter().enumerate() {
                path.push(Segment::index(i));
                validate_at(v, items, path)?;
                path.pop();
            }
            Ok(())
        }
        (SchemaNode::Map(values_node), MemoryValue::Map(entries)) => {
            for (k, v) in entries {
                path.push(Segment::key(k.as_str()));
                validate_at(v, values_node, path)?;
                path.pop();
            }
            Ok(())
        }
        (SchemaNode::Record(record), MemoryValue::Map(entries)) => {
            for (k, v) in entries {
                path.push(Segment::key(k.as_str()));
                match record.field(k) {
                    Some(f) => validate_at(v, &f.node, path)?,
                    None => {
                        return Err(Violation {
                            path: path.clone(),
                            kind: ViolationKind::UnknownField(k.clone()),
                        })
                    }
                }
                path.pop();
            }
            if let Some(missing) = record
                .fields
                .iter()
                .find(|f| !entries.contains_key(&f.name))
            {
                return Err(Violation {
                    path: path.clone(),
                    kind: ViolationKind::MissingField(missing.name.clone()),
                });
            }
            Ok(())
        }
        _ => Err(mismatch(path)),
    }
}
