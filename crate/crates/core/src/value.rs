//! Typed hierarchy values and their canonical JSON form.
//!
//! A memory is a tree of primitives, lists and string-keyed maps. Map key
//! order is insertion order and it is part of a value's identity: two maps
//! with the same entries in a different order are different values, because
//! they serialize to different bytes and therefore to different prompt
//! prefixes.

use std::fmt;

use indexmap::IndexMap;
use serde_json::{Number, Value};
use thiserror::Error;

/// Ordered map used for every map node of the hierarchy.
pub type ValueMap = IndexMap<String, MemoryValue>;

/// A node of the typed hierarchy.
#[derive(Debug, Clone)]
pub enum MemoryValue {
    Integer(i64),
    Float(f64),
    String(String),
    Boolean(bool),
    List(Vec<MemoryValue>),
    Map(ValueMap),
}

/// Reasons a JSON document cannot be read as a [`MemoryValue`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValueError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("null is not a memory value (at {0})")]
    Null(String),
    #[error("empty map key (at {0})")]
    EmptyKey(String),
    #[error("number out of range (at {0})")]
    NumberRange(String),
    #[error("memory root must be a map, found {0}")]
    RootNotMap(&'static str),
}

impl MemoryValue {
    /// Short name of the variant, used in violation reports.
    pub fn kind(&self) -> &'static str {
        match self {
            MemoryValue::Integer(_) => "integer",
            MemoryValue::Float(_) => "float",
            MemoryValue::String(_) => "string",
            MemoryValue::Boolean(_) => "boolean",
            MemoryValue::List(_) => "list",
            MemoryValue::Map(_) => "map",
        }
    }

    pub fn empty_map() -> Self {
        MemoryValue::Map(ValueMap::new())
    }

    pub fn as_map(&self) -> Option<&ValueMap> {
        match self {
            MemoryValue::Map(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[MemoryValue]> {
        match self {
            MemoryValue::List(l) => Some(l),
            _ => None,
        }
    }

    /// Converts a parsed JSON value. `null` and empty keys are rejected.
    pub fn from_json(value: &Value) -> Result<Self, ValueError> {
        let mut location = String::new();
        Self::from_json_at(value, &mut location)
    }

    fn from_json_at(value: &Value, location: &mut String) -> Result<Self, ValueError> {
        let here = |loc: &String| {
            if loc.is_empty() {
                "/".to_string()
            } else {
                loc.clone()
            }
        };
        Ok(match value {
            Value::Null => return Err(ValueError::Null(here(location))),
            Value::Bool(b) => MemoryValue::Boolean(*b),
            Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    MemoryValue::Integer(i)
                } else if let Some(f) = n.as_f64().filter(|f| f.is_finite()) {
                    MemoryValue::Float(f)
                } else {
                    return Err(ValueError::NumberRange(here(location)));
                }
            }
            Value::String(s) => MemoryValue::String(s.clone()),
            Value::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    let len = location.len();
                    location.push('/');
                    location.push_str(&i.to_string());
                    out.push(Self::from_json_at(item, location)?);
                    location.truncate(len);
                }
                MemoryValue::List(out)
            }
            Value::Object(obj) => {
                let mut out = ValueMap::with_capacity(obj.len());
                for (k, v) in obj {
                    if k.is_empty() {
                        return Err(ValueError::EmptyKey(here(location)));
                    }
                    let len = location.len();
                    location.push('/');
                    location.push_str(&crate::path::escape_segment(k));
                    out.insert(k.clone(), Self::from_json_at(v, location)?);
                    location.truncate(len);
                }
                MemoryValue::Map(out)
            }
        })
    }

    /// Converts to a `serde_json` value, keeping map order.
    pub fn to_json(&self) -> Value {
        match self {
            MemoryValue::Integer(i) => Value::Number((*i).into()),
            MemoryValue::Float(f) => Number::from_f64(*f)
                .map(Value::Number)
                .unwrap_or(Value::Null),
            MemoryValue::String(s) => Value::String(s.clone()),
            MemoryValue::Boolean(b) => Value::Bool(*b),
            MemoryValue::List(items) => Value::Array(items.iter().map(Self::to_json).collect()),
            MemoryValue::Map(m) => {
                Value::Object(m.iter().map(|(k, v)| (k.clone(), v.to_json())).collect())
            }
        }
    }

    /// Compact canonical JSON: insertion-ordered keys, no whitespace.
    pub fn to_canonical_json(&self) -> String {
        let mut out = String::new();
        self.write_canonical(&mut out);
        out
    }

    pub(crate) fn write_canonical(&self, out: &mut String) {
        match self {
            MemoryValue::Integer(i) => out.push_str(&i.to_string()),
            MemoryValue::Float(f) => {
                // serde_json formats floats through ryu and always keeps a
                // fractional part, so the text re-parses as a float.
                let n = Number::from_f64(*f).expect("memory floats are finite");
                out.push_str(&n.to_string());
            }
            MemoryValue::String(s) => write_json_string(s, out),
            MemoryValue::Boolean(b) => out.push_str(if *b { "true" } else { "false" }),
            MemoryValue::List(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    item.write_canonical(out);
                }
                out.push(']');
            }
            MemoryValue::Map(m) => {
                out.push('{');
                for (i, (k, v)) in m.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    write_json_string(k, out);
                    out.push(':');
                    v.write_canonical(out);
                }
                out.push('}');
            }
        }
    }

    /// Parses canonical (or any) JSON text into a value.
    pub fn parse_json(text: &str) -> Result<Self, ValueError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| ValueError::Json(e.to_string()))?;
        Self::from_json(&value)
    }
}

pub(crate) fn write_json_string(s: &str, out: &mut String) {
    out.push_str(&serde_json::to_string(s).expect("strings always serialize"));
}

impl PartialEq for MemoryValue {
    fn eq(&self, other: &Self) -> bool {
        use MemoryValue::*;
        match (self, other) {
            (Integer(a), Integer(b)) => a == b,
            (Float(a), Float(b)) => a == b,
            (String(a), String(b)) => a == b,
            (Boolean(a), Boolean(b)) => a == b,
            (List(a), List(b)) => a == b,
            // IndexMap equality ignores order; memory identity does not.
            (Map(a), Map(b)) => a.len() == b.len() && a.iter().eq(b.iter()),
            _ => false,
        }
    }
}

impl fmt::Display for MemoryValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical_json())
    }
}

impl From<&str> for MemoryValue {
    fn from(s: &str) -> Self {
        MemoryValue::String(s.to_string())
    }
}

impl From<String> for MemoryValue {
    fn from(s: String) -> Self {
        MemoryValue::String(s)
    }
}

impl From<i64> for MemoryValue {
    fn from(i: i64) -> Self {
        MemoryValue::Integer(i)
    }
}

impl From<f64> for MemoryValue {
    fn from(f: f64) -> Self {
        MemoryValue::Float(f)
    }
}

impl From<bool> for MemoryValue {
    fn from(b: bool) -> Self {
        MemoryValue::Boolean(b)
    }
}

/// A structured memory: a map-rooted [`MemoryValue`].
#[derive(Debug, Clone, Default)]
pub struct Memory {
    root: ValueMap,
}

impl PartialEq for Memory {
    fn eq(&self, other: &Self) -> bool {
        self.root.len() == other.root.len() && self.root.iter().eq(other.root.iter())
    }
}

impl Memory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_map(root: ValueMap) -> Self {
        Self { root }
    }

    /// Builds a memory from a value, which must be a map.
    pub fn from_value(value: MemoryValue) -> Result<Self, ValueError> {
        match value {
            MemoryValue::Map(root) => Ok(Self { root }),
            other => Err(ValueError::RootNotMap(other.kind())),
        }
    }

    pub fn root(&self) -> &ValueMap {
        &self.root
    }

    pub(crate) fn root_mut(&mut self) -> &mut ValueMap {
        &mut self.root
    }

    pub fn is_empty(&self) -> bool {
        self.root.is_empty()
    }

    pub fn to_value(&self) -> MemoryValue {
        MemoryValue::Map(self.root.clone())
    }

    pub fn to_canonical_json(&self) -> String {
        let mut out = String::new();
        self.write_canonical(&mut out);
        out
    }

    pub(crate) fn write_canonical(&self, out: &mut String) {
        out.push('{');
        for (i, (k, v)) in self.root.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write_json_string(k, out);
            out.push(':');
            v.write_canonical(out);
        }
        out.push('}');
    }

    pub fn parse_json(text: &str) -> Result<Self, ValueError> {
        Self::from_value(MemoryValue::parse_json(text)?)
    }
}
