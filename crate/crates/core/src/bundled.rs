//! Schemas shipped with the crate.

use std::path::Path as FsPath;

use serde::Deserialize;

use crate::schema::{parse_schema, Schema, SchemaError};

/// `(file stem, descriptor text)` for every bundled schema.
pub const SCHEMAS: [(&str, &str); 6] = [
    (
        "book_summary",
        include_str!("../schemas/book_summary.schema.json"),
    ),
    (
        "function_descriptor",
        include_str!("../schemas/function_descriptor.schema.json"),
    ),
    (
        "relevant_table_info",
        include_str!("../schemas/relevant_table_info.schema.json"),
    ),
    (
        "narrative_summary",
        include_str!("../schemas/narrative_summary.schema.json"),
    ),
    (
        "function_match",
        include_str!("../schemas/function_match.schema.json"),
    ),
    (
        "query_partial_solution",
        include_str!("../schemas/query_partial_solution.schema.json"),
    ),
];

const EXEMPLAR_MANIFEST: &str = include_str!("../schemas/exemplars.json");

/// Looks up a bundled schema by file stem.
pub fn schema(name: &str) -> Option<Schema> {
    SCHEMAS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| parse_schema(text).expect("bundled schemas parse"))
}

/// A worked example for schema generation.
#[derive(Debug, Clone, PartialEq)]
pub struct Exemplar {
    pub description: String,
    pub example_query: String,
    pub schema: Schema,
}

#[derive(Deserialize)]
struct ManifestEntry {
    description: String,
    example_query: String,
    schema: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ExemplarError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("exemplar manifest: {0}")]
    Manifest(String),
    #[error("exemplar schema {path}: {source}")]
    Schema { path: String, source: SchemaError },
    #[error("exemplar set is empty")]
    Empty,
}

/// The three hand-written exemplars, in fixed order.
pub fn exemplars() -> Vec<Exemplar> {
    load_manifest(EXEMPLAR_MANIFEST, |file| {
        SCHEMAS
            .iter()
            .find(|(n, _)| format!("{n}.schema.json") == file)
            .map(|(_, text)| text.to_string())
            .ok_or_else(|| ExemplarError::Manifest(format!("unknown bundled schema {file}")))
    })
    .expect("bundled exemplars load")
}

/// Loads `exemplars.json` and the descriptor files it names from `dir`.
pub fn load_exemplars(dir: &FsPath) -> Result<Vec<Exemplar>, ExemplarError> {
    let read = |p: &FsPath| {
        std::fs::read_to_string(p).map_err(|e| ExemplarError::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        })
    };
    let manifest = read(&dir.join("exemplars.json"))?;
    load_manifest(&manifest, |file| read(&dir.join(file)))
}

fn load_manifest(
    manifest: &str,
    read: impl Fn(&str) -> Result<String, ExemplarError>,
) -> Result<Vec<Exemplar>, ExemplarError> {
    let entries: Vec<ManifestEntry> =
        serde_json::from_str(manifest).map_err(|e| ExemplarError::Manifest(e.to_string()))?;
    if entries.is_empty() {
        return Err(ExemplarError::Empty);
    }
    entries
        .into_iter()
        .map(|e| {
            let text = read(&e.schema)?;
            let schema = parse_schema(&text).map_err(|source| ExemplarError::Schema {
                path: e.schema.clone(),
                source,
            })?;
            Ok(Exemplar {
                description: e.description,
                example_query: e.example_query,
                schema,
            })
        })
        .collect()
}
