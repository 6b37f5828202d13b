use std::path::{Path, PathBuf};

use serde::Deserialize;
use structmem::backend::{
    Backend, HttpBackend, HttpConfig, RecordingBackend, ReplayBackend, ScriptedBackend,
};
use structmem::schema::{parse_schema, Schema};
use structmem::PipelineConfig;

use crate::{CliError, EXIT_BACKEND, EXIT_CONFIG, EXIT_SCHEMA};

/// Which backend a run talks to. Relative paths are resolved against the
/// config file's directory.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    Scripted { fixture: PathBuf },
    Replay { cassette: PathBuf },
    Http(HttpConfig),
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct RunFile {
    #[serde(flatten)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub backend: Option<BackendSpec>,
    /// Record every live response to this cassette.
    #[serde(default)]
    pub record: Option<PathBuf>,
}

impl RunFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::new(
                EXIT_CONFIG,
                format!("cannot read config {}: {e}", path.display()),
            )
        })?;
        let mut file: RunFile = serde_json::from_str(&text).map_err(|e| {
            CliError::new(
                EXIT_CONFIG,
                format!("invalid config {}: {e}", path.display()),
            )
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        match &mut file.backend {
            Some(BackendSpec::Scripted { fixture }) => *fixture = base.join(&*fixture),
            Some(BackendSpec::Replay { cassette }) => *cassette = base.join(&*cassette),
            _ => {}
        }
        if let Some(record) = &mut file.record {
            *record = base.join(&*record);
        }
        Ok(file)
    }
}

pub fn load_schema(path: &Path) -> Result<Schema, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::new(
            EXIT_SCHEMA,
            format!("cannot read schema {}: {e}", path.display()),
        )
    })?;
    parse_schema(&text).map_err(|e| {
        CliError::new(
            EXIT_SCHEMA,
            format!("invalid schema {}: {e}", path.display()),
        )
    })
}

/// `append` keeps an existing cassette, for commands that build several
/// backends in one invocation.
pub fn build_backend(
    spec: Option<&BackendSpec>,
    record: Option<&Path>,
    append: bool,
) -> Result<Box<dyn Backend>, CliError> {
    let spec = spec.ok_or_else(|| CliError::new(EXIT_CONFIG, "no backend configured"))?;
    let inner: Box<dyn Backend> = match spec {
        BackendSpec::Scripted { fixture } => {
            let text = std::fs::read_to_string(fixture).map_err(|e| {
                CliError::new(
                    EXIT_CONFIG,
                    format!("cannot read fixture {}: {e}", fixture.display()),
                )
            })?;
            let backend = ScriptedBackend::from_json(&text).map_err(|e| {
                CliError::new(
                    EXIT_CONFIG,
                    format!("invalid fixture {}: {e}", fixture.display()),
                )
            })?;
            Box::new(backend)
        }
        BackendSpec::Replay { cassette } => Box::new(
            ReplayBackend::load(cassette).map_err(|e| CliError::new(EXIT_CONFIG, e.to_string()))?,
        ),
        BackendSpec::Http(config) => {
            let mut config = config.clone();
            config.apply_env();
            Box::new(
                HttpBackend::new(config).map_err(|e| CliError::new(EXIT_CONFIG, e.to_string()))?,
            )
        }
    };
    match record {
        None => Ok(inner),
        Some(path) => {
            let rec = if append {
                RecordingBackend::append(inner, path)
            } else {
                RecordingBackend::create(inner, path)
            };
            Ok(Box::new(
                rec.map_err(|e| CliError::new(EXIT_BACKEND, e.to_string()))?,
            ))
        }
    }
}
