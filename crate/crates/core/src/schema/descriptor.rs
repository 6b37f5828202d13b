//! The `.schema.json` descriptor format.
//!
//! ```json
//! {
//!   "name": "BookSummary",
//!   "doc": "...",
//!   "root": {
//!     "kind": "record",
//!     "fields": [
//!       { "name": "attributes",
//!         "type": { "kind": "map", "values": { "kind": "list", "items": "string" } } }
//!     ]
//!   }
//! }
//! ```
//!
//! Primitive nodes may be written either as a bare kind string or as
//! `{"kind": ...}`. Every key is optional at the top level; `{}` is the
//! empty record schema named `Memory`.

use serde_json::{json, Map, Value};

use super::{Field, Record, Schema, SchemaError, SchemaNode};

const DEFAULT_NAME: &str = "Memory";

pub fn parse_schema(text: &str) -> Result<Schema, SchemaError> {
    let value: Value = serde_json::from_str(text).map_err(|e| SchemaError::Syntax {
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let obj = as_object(&value, "")?;
    let name = opt_string(obj, "name", "")?
        .unwrap_or(DEFAULT_NAME)
        .to_string();
    let doc = opt_string(obj, "doc", "")?.unwrap_or_default().to_string();
    check_identifier(&name, "/name")?;
    let root = match obj.get("root") {
        Some(node) => parse_node(node, "/root", true)?,
        None => SchemaNode::Record(Record {
            name: name.clone(),
            doc: doc.clone(),
            fields: vec![],
        }),
    };
    if let SchemaNode::Record(r) = &root {
        if (!r.name.is_empty() && r.name != name) || (!r.doc.is_empty() && r.doc != doc) {
            return Err(syntax(
                "/root",
                "root record name and doc must match the schema's",
            ));
        }
    }
    Schema::new(name, doc, root)
}

fn syntax(location: &str, message: impl Into<String>) -> SchemaError {
    SchemaError::Syntax {
        location: if location.is_empty() {
            "/".into()
        } else {
            location.into()
        },
        message: message.into(),
    }
}

fn as_object<'a>(value: &'a Value, location: &str) -> Result<&'a Map<String, Value>, SchemaError> {
    value
        .as_object()
        .ok_or_else(|| syntax(location, "expected an object"))
}

fn opt_string<'a>(
    obj: &'a Map<String, Value>,
    key: &str,
    location: &str,
) -> Result<Option<&'a str>, SchemaError> {
    match obj.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(_) => Err(syntax(&format!("{location}/{key}"), "expected a string")),
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn check_identifier(s: &str, location: &str) -> Result<(), SchemaError> {
    if is_identifier(s) {
        Ok(())
    } else {
        Err(syntax(location, format!("`{s}` is not an identifier")))
    }
}

fn primitive(kind: &str) -> Option<SchemaNode> {
    Some(match kind {
        "integer" => SchemaNode::Integer,
        "float" => SchemaNode::Float,
        "string" => SchemaNode::String,
        "boolean" => SchemaNode::Boolean,
        _ => return None,
    })
}

fn parse_node(value: &Value, location: &str, is_root: bool) -> Result<SchemaNode, SchemaError> {
    let obj = match value {
        Value::String(kind) => {
            return primitive(kind).ok_or_else(|| SchemaError::UnknownTypeName {
                name: kind.clone(),
                location: location.into(),
            })
        }
        Value::Object(obj) => obj,
        _ => return Err(syntax(location, "expected a type name or a node object")),
    };
    let kind = match obj.get("kind") {
        Some(Value::String(k)) => k.as_str(),
        Some(_) => return Err(syntax(&format!("{location}/kind"), "expected a string")),
        None => return Err(syntax(location, "missing `kind`")),
    };
    if let Some(p) = primitive(kind) {
        return Ok(p);
    }
    match kind {
        "list" => {
            let items = obj
                .get("items")
                .ok_or_else(|| syntax(location, "missing `items`"))?;
            Ok(SchemaNode::list(parse_node(
                items,
                &format!("{location}/items"),
                false,
            )?))
        }
        "map" => {
            let values = obj
                .get("values")
                .ok_or_else(|| syntax(location, "missing `values`"))?;
            Ok(SchemaNode::map(parse_node(
                values,
                &format!("{location}/values"),
                false,
            )?))
        }
        "record" => {
            let name = opt_string(obj, "name", location)?
                .unwrap_or_default()
                .to_string();
            if is_root {
                if !name.is_empty() {
                    check_identifier(&name, &format!("{location}/name"))?;
                }
            } else {
                check_identifier(&name, &format!("{location}/name"))?;
            }
            let doc = opt_string(obj, "doc", location)?
                .unwrap_or_default()
                .to_string();
            let fields_value = obj.get("fields").cloned().unwrap_or(Value::Array(vec![]));
            let items = fields_value
                .as_array()
                .ok_or_else(|| syntax(&format!("{location}/fields"), "expected an array"))?;
            let mut fields: Vec<Field> = Vec::with_capacity(items.len());
            for (i, item) in items.iter().enumerate() {
                let floc = format!("{location}/fields/{i}");
                let fobj = as_object(item, &floc)?;
                let fname = opt_string(fobj, "name", &floc)?
                    .ok_or_else(|| syntax(&floc, "missing `name`"))?;
                check_identifier(fname, &format!("{floc}/name"))?;
                if fields.iter().any(|f| f.name == fname) {
                    return Err(SchemaError::DuplicateField {
                        record: if name.is_empty() {
                            "<root>".into()
                        } else {
                            name.clone()
                        },
                        field: fname.to_string(),
                        location: floc,
                    });
                }
                let ftype = fobj
                    .get("type")
                    .ok_or_else(|| syntax(&floc, "missing `type`"))?;
                let fdoc = opt_string(fobj, "doc", &floc)?.unwrap_or_default().trim();
                if fdoc.contains('\n') {
                    return Err(syntax(&format!("{floc}/doc"), "field docs are single-line"));
                }
                fields.push(Field {
                    name: fname.to_string(),
                    node: parse_node(ftype, &format!("{floc}/type"), false)?,
                    doc: fdoc.to_string(),
                });
            }
            Ok(SchemaNode::Record(Record { name, doc, fields }))
        }
        other => Err(SchemaError::UnknownTypeName {
            name: other.to_string(),
            location: format!("{location}/kind"),
        }),
    }
}

fn node_to_value(node: &SchemaNode, is_root: bool) -> Value {
    match node {
        SchemaNode::Integer => json!("integer"),
        SchemaNode::Float => json!("float"),
        SchemaNode::String => json!("string"),
        SchemaNode::Boolean => json!("boolean"),
        SchemaNode::List(items) => json!({"kind": "list", "items": node_to_value(items, false)}),
        SchemaNode::Map(values) => json!({"kind": "map", "values": node_to_value(values, false)}),
        SchemaNode::Record(r) => {
            let fields: Vec<Value> = r
                .fields
                .iter()
                .map(|f| {
                    let mut m = Map::new();
                    m.insert("name".into(), json!(f.name));
                    m.insert("type".into(), node_to_value(&f.node, false));
                    if !f.doc.is_empty() {
                        m.insert("doc".into(), json!(f.doc));
                    }
                    Value::Object(m)
                })
                .collect();
            let mut m = Map::new();
            m.insert("kind".into(), json!("record"));
            if !is_root {
                m.insert("name".into(), json!(r.name));
                if !r.doc.is_empty() {
                    m.insert("doc".into(), json!(r.doc));
                }
            }
            m.insert("fields".into(), Value::Array(fields));
            Value::Object(m)
        }
    }
}

pub(crate) fn to_descriptor(schema: &Schema) -> Value {
    let mut m = Map::new();
    m.insert("name".into(), json!(schema.name()));
    m.insert("doc".into(), json!(schema.doc()));
    m.insert("root".into(), node_to_value(schema.root(), true));
    Value::Object(m)
}

pub(crate) fn to_descriptor_string(schema: &Schema) -> String {
    let mut s =
        serde_json::to_string_pretty(&to_descriptor(schema)).expect("descriptor serializes");
    s.push('\n');
    s
}
