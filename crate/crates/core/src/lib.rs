//! Schema-typed structured memory for reading long inputs chunk by chunk.
//!
//! A run splits a document into token-budgeted chunks and asks a model, one
//! chunk at a time, to propose [`Revision`]s against a typed [`Memory`]. The
//! memory is either rewritten in place or kept as an append-only
//! [`AmendmentLog`] whose serialization only ever grows at the end, so each
//! prompt shares a long prefix with the previous one. [`TokenLedger`]
//! measures how much of each prompt a single-slot prefix cache could reuse.

pub mod amendments;
pub mod backend;
pub mod bundled;
pub mod cache;
pub mod chunk;
#[doc(hidden)]
pub mod fuzz_checks;
pub mod path;
pub mod pipeline;
pub mod prompt;
pub mod revision;
pub mod schema;
pub mod schemagen;
pub mod tokenizer;
pub mod value;

pub use amendments::{AmendmentEntry, AmendmentLog, LogParseError};
pub use backend::{
    Backend, BackendError, BackendRequest, BackendResponse, DecodeParams, HttpBackend, HttpConfig,
    RecordingBackend, ReplayBackend, Script, ScriptedBackend, Usage,
};
pub use cache::{cost_index, CacheState, LedgerReport, TokenLedger};
pub use chunk::{chunk, ChunkError, ChunkStream, MIN_CHUNK_BUDGET};
pub use path::{Path, PathSyntaxError, Segment};
pub use pipeline::{
    parse_revisions, run, MemoryMode, OpsPolicy, PipelineConfig, RunError, RunReport, StepRecord,
};
pub use revision::{apply_revision, resolve_path, Lookup, Operation, Revision, RevisionError};
pub use schema::{Schema, SchemaError, SchemaNode, Violation, ViolationKind};
pub use schemagen::{generate_schema, SchemaGenError, SchemaGenOutcome, SchemaGenRequest};
pub use tokenizer::{BuiltinTokenizer, TokenId, TokenSeq, Tokenizer};
pub use value::{Memory, MemoryValue, ValueError, ValueMap};
