//! The chunked reading loop.
//!
//! For every chunk the pipeline assembles a prompt, accounts for it against
//! the prefix cache, asks the backend for revisions and applies them. After
//! the last chunk one more call produces the answer from the final memory.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::amendments::{entry_from_json, AmendmentLog};
use crate::backend::{Backend, BackendError, BackendRequest, DecodeParams, Usage};
use crate::cache::{CacheState, LedgerReport, TokenLedger};
use crate::chunk::{chunk, ChunkError, MIN_CHUNK_BUDGET};
use crate::prompt::{self, MemoryStyle, PromptHeader, TEMPLATE_VERSION};
use crate::revision::{apply_revision, Operation, Revision};
use crate::schema::Schema;
use crate::tokenizer::Tokenizer;
use crate::value::Memory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryMode {
    InPlace,
    #[default]
    Amendments,
    NaturalLanguageBaseline,
}

impl MemoryMode {
    fn style(self) -> MemoryStyle {
        match self {
            MemoryMode::InPlace => MemoryStyle::InPlace,
            MemoryMode::Amendments => MemoryStyle::Amendments,
            MemoryMode::NaturalLanguageBaseline => MemoryStyle::NaturalLanguage,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpsPolicy {
    #[default]
    AddAndUpdate,
    AddOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub memory_mode: MemoryMode,
    pub ops_policy: OpsPolicy,
    pub chunk_budget: usize,
    pub retry_limit: u32,
    pub decode_params: DecodeParams,
    pub task_instruction: String,
    pub final_instruction: String,
    pub query: String,
    /// Model context size in tokens. When set, a step prompt with empty
    /// memory and a full chunk must fit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub context_window: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            memory_mode: MemoryMode::default(),
            ops_policy: OpsPolicy::default(),
            chunk_budget: 4096,
            retry_limit: 2,
            decode_params: DecodeParams::default(),
            task_instruction: String::new(),
            final_instruction: String::new(),
            query: String::new(),
            context_window: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), RunError> {
        if self.chunk_budget < MIN_CHUNK_BUDGET {
            return Err(RunError::Config(format!(
                "chunk_budget {} is below the minimum of {MIN_CHUNK_BUDGET}",
                self.chunk_budget
            )));
        }
        self.decode_params.validate().map_err(RunError::Config)?;
        if let Some(window) = self.context_window {
            if self.chunk_budget >= window {
                return Err(RunError::Config(format!(
                    "chunk_budget {} does not fit the context window of {window} tokens",
                    self.chunk_budget
                )));
            }
        }
        Ok(())
    }

    fn schema_text(&self, schema: &Schema) -> String {
        match self.memory_mode {
            MemoryMode::NaturalLanguageBaseline => String::new(),
            _ => schema.render(),
        }
    }

    /// The fixed header shared by every step prompt of a run.
    pub fn header(&self, schema: &Schema) -> PromptHeader {
        let instructions = prompt::output_instructions(
            self.memory_mode.style(),
            self.ops_policy == OpsPolicy::AddOnly,
        );
        PromptHeader::new(
            &self.task_instruction,
            &self.query,
            &self.schema_text(schema),
            &instructions,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("no JSON array of revision objects found in model output")]
    NoRevisionFound,
}

/// One element of the model's revision array.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedItem {
    pub raw: Value,
    pub revision: Result<Revision, String>,
}

/// Finds the first JSON array in `output` whose elements are all objects
/// and maps each element to a revision. Prose and code fences around the
/// array are skipped.
pub fn parse_revisions(output: &str) -> Result<Vec<ParsedItem>, ParseError> {
    for (at, _) in output.match_indices('[') {
        let mut stream = serde_json::Deserializer::from_str(&output[at..]).into_iter::<Value>();
        let Some(Ok(Value::Array(items))) = stream.next() else {
            continue;
        };
        if !items.iter().all(Value::is_object) {
            continue;
        }
        return Ok(items
            .into_iter()
            .map(|raw| {
                let revision = entry_from_json(&raw);
                ParsedItem { raw, revision }
            })
            .collect());
    }
    Err(ParseError::NoRevisionFound)
}

/// One backend call, including retries, with its ledger deltas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub prompt: String,
    pub raw_output: String,
    pub attempts: u32,
    pub prompt_tokens: u64,
    pub reused: u64,
    pub output_tokens: u64,
    /// Counts reported by the remote service, summed over attempts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub remote_usage: Option<Usage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    /// Position in the model's revision array.
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based chunk index.
    pub step: usize,
    #[serde(flatten)]
    pub call: CallRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
    pub revisions: Vec<Value>,
    pub applied: usize,
    pub rejected: Vec<Rejection>,
}

impl StepRecord {
    pub fn parsed(&self) -> usize {
        self.revisions.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub template_version: String,
    pub config: PipelineConfig,
    pub schema_name: String,
    pub schema_hash: String,
    pub chunk_count: usize,
    pub steps: Vec<StepRecord>,
    pub final_call: Option<CallRecord>,
    pub final_answer: Option<String>,
    /// The resolved memory, or the free-text memory in the baseline mode.
    pub final_memory: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amendment_log: Option<String>,
    pub ledger: TokenLedger,
    pub summary: LedgerReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Per-call ledger deltas; the final-answer call is the last row.
    pub fn steps_tsv(&self) -> String {
        let mut out = String::from("step\tprompt_tokens\treused\toutput_tokens\n");
        let rows = self
            .steps
            .iter()
            .map(|s| (s.step.to_string(), &s.call))
            .chain(self.final_call.iter().map(|c| ("final".to_string(), c)));
        for (label, c) in rows {
            out.push_str(&format!(
                "{label}\t{}\t{}\t{}\n",
                c.prompt_tokens, c.reused, c.output_tokens
            ));
        }
        out
    }

    pub fn completed(&self) -> bool {
        self.error.is_none() && self.final_answer.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Document(#[from] ChunkError),
    #[error("backend failed at {stage}: {source}")]
    Backend {
        stage: String,
        source: BackendError,
        partial: Box<RunReport>,
    },
}

enum State {
    InPlace(Memory),
    Amendments(AmendmentLog),
    Text(String),
}

impl State {
    fn new(mode: MemoryMode) -> Self {
        match mode {
            MemoryMode::InPlace => State::InPlace(Memory::new()),
            MemoryMode::Amendments => State::Amendments(AmendmentLog::default()),
            MemoryMode::NaturalLanguageBaseline => State::Text(String::new()),
        }
    }

    fn prompt_text(&self) -> String {
        match self {
            State::InPlace(m) if m.is_empty() => String::new(),
            State::InPlace(m) => format!("{}\n", m.to_canonical_json()),
            State::Amendments(log) if log.is_blank() => String::new(),
            State::Amendments(log) => log.serialize().to_string(),
            State::Text(t) => with_newline(t),
        }
    }

    fn final_text(&self) -> String {
        match self {
            State::InPlace(m) => format!("{}\n", m.to_canonical_json()),
            State::Amendments(log) => format!("{}\n", log.resolved().to_canonical_json()),
            State::Text(t) => with_newline(t),
        }
    }

    fn apply(&mut self, revision: &Revision, schema: &Schema) -> Result<(), String> {
        match self {
            State::InPlace(m) => {
                *m = apply_revision(m, revision, schema).map_err(|e| e.to_string())?;
                Ok(())
            }
            State::Amendments(log) => log.push(revision, schema).map_err(|e| e.to_string()),
            State::Text(_) => unreachable!("text memory takes no revisions"),
        }
    }

    fn final_memory(&self) -> Value {
        match self {
            State::InPlace(m) => m.to_value().to_json(),
            State::Amendments(log) => log.resolved().to_value().to_json(),
            State::Text(t) => Value::String(t.clone()),
        }
    }

    fn log(&self) -> Option<String> {
        match self {
            State::Amendments(log) => Some(log.serialize().to_string()),
            _ => None,
        }
    }
}

fn with_newline(t: &str) -> String {
    if t.is_empty() || t.ends_with('\n') {
        t.to_string()
    } else {
        format!("{t}\n")
    }
}

struct Runner<'a> {
    config: &'a PipelineConfig,
    backend: &'a dyn Backend,
    tokenizer: &'a dyn Tokenizer,
    cache: CacheState,
    ledger: TokenLedger,
}

impl Runner<'_> {
    /// Sends `prompt` until the backend answers and `accept` likes the
    /// output, or the retry budget runs out. Only answered attempts are
    /// accounted.
    fn call<T>(
        &mut self,
        prompt: String,
        accept: impl Fn(&str) -> Result<T, String>,
    ) -> Result<(CallRecord, Result<T, String>), BackendError> {
        let request = BackendRequest::new(prompt, self.config.decode_params);
        let prompt_seq = self.tokenizer.tokenize(&request.prompt);
        let mut record = CallRecord {
            prompt: String::new(),
            raw_output: String::new(),
            attempts: 0,
            prompt_tokens: 0,
            reused: 0,
            output_tokens: 0,
            remote_usage: None,
        };
        let mut usage: Option<Usage> = None;
        let mut all_usage = true;
        let mut outcome = None;
        for attempt in 0..=self.config.retry_limit {
            record.attempts += 1;
            let response = match self.backend.complete(&request) {
                Ok(r) => r,
                Err(e) if attempt == self.config.retry_limit => return Err(e),
                Err(_) => continue,
            };
            record.prompt_tokens += prompt_seq.len() as u64;
            record.reused += self.ledger.record_encode(&mut self.cache, &prompt_seq);
            let output_seq = self.tokenizer.tokenize(&response.text);
            record.output_tokens += output_seq.len() as u64;
            self.ledger.record_decode(&output_seq);
            match (response.usage, &mut usage) {
                (Some(u), Some(acc)) => {
                    acc.prompt_tokens += u.prompt_tokens;
                    acc.output_tokens += u.output_tokens;
                }
                (Some(u), None) => usage = Some(u),
                (None, _) => all_usage = false,
            }
            let accepted = accept(&response.text);
            record.raw_output = response.text;
            let done = accepted.is_ok();
            outcome = Some(accepted);
            if done {
                break;
            }
        }
        record.prompt = request.prompt;
        record.remote_usage = usage.filter(|_| all_usage);
        Ok((record, outcome.expect("at least one answered attempt")))
    }
}

/// Runs the reading loop over `document` and returns the full report.
pub fn run(
    config: &PipelineConfig,
    schema: &Schema,
    document: &str,
    backend: &dyn Backend,
    tokenizer: &dyn Tokenizer,
) -> Result<RunReport, RunError> {
    config.validate()?;
    let header = config.header(schema);
    if let Some(window) = config.context_window {
        let fixed = tokenizer.count(&prompt::assemble_prompt(&header, "", ""));
        if fixed + config.chunk_budget > window {
            return Err(RunError::Config(format!(
                "prompt header ({fixed} tokens) plus chunk_budget {} exceeds the context window of {window}",
                config.chunk_budget
            )));
        }
    }
    let chunks = chunk(document, config.chunk_budget, tokenizer)?;
    let schema_text = config.schema_text(schema);

    let mut runner = Runner {
        config,
        backend,
        tokenizer,
        cache: CacheState::new(),
        ledger: TokenLedger::new(),
    };
    let mut state = State::new(config.memory_mode);
    let mut report = RunReport {
        template_version: TEMPLATE_VERSION.to_string(),
        config: config.clone(),
        schema_name: schema.name().to_string(),
        schema_hash: schema.content_hash(),
        chunk_count: chunks.len(),
        steps: Vec::with_capacity(chunks.len()),
        final_call: None,
        final_answer: None,
        final_memory: Value::Null,
        amendment_log: None,
        ledger: TokenLedger::new(),
        summary: TokenLedger::new().report(),
        error: None,
    };

    let finish = |report: &mut RunReport, runner: &Runner, state: &State| {
        report.final_memory = state.final_memory();
        report.amendment_log = state.log();
        report.ledger = runner.ledger;
        report.summary = runner.ledger.report();
    };
    let fail = |mut report: RunReport,
                runner: &Runner,
                state: &State,
                stage: String,
                source: BackendError| {
        finish(&mut report, runner, state);
        report.error = Some(format!("backend failed at {stage}: {source}"));
        RunError::Backend {
            stage,
            source,
            partial: Box::new(report),
        }
    };

    for (i, text) in chunks.iter().enumerate() {
        let step = i + 1;
        let prompt = prompt::assemble_prompt(&header, &state.prompt_text(), text);
        let record = if let State::Text(memory) = &mut state {
            let (call, _) = match runner.call(prompt, |_| Ok(())) {
                Ok(r) => r,
                Err(e) => return Err(fail(report, &runner, &state, format!("step {step}"), e)),
            };
            *memory = call.raw_output.clone();
            StepRecord {
                step,
                call,
                parse_error: None,
                revisions: Vec::new(),
                applied: 0,
                rejected: Vec::new(),
            }
        } else {
            let parsed = runner.call(prompt, |out| {
                parse_revisions(out).map_err(|e| e.to_string())
            });
            let (call, parsed) = match parsed {
                Ok(r) => r,
                Err(e) => return Err(fail(report, &runner, &state, format!("step {step}"), e)),
            };
            let mut record = StepRecord {
                step,
                call,
                parse_error: None,
                revisions: Vec::new(),
                applied: 0,
                rejected: Vec::new(),
            };
            match parsed {
                Err(e) => record.parse_error = Some(e),
                Ok(items) => {
                    for (index, item) in items.into_iter().enumerate() {
                        let outcome = item.revision.and_then(|rev| {
                            if config.ops_policy == OpsPolicy::AddOnly
                                && rev.op == Operation::Update
                            {
                                return Err(
                                    "update is not permitted under the add-only policy".into()
                                );
                            }
                            state.apply(&rev, schema)
                        });
                        match outcome {
                            Ok(()) => record.applied += 1,
                            Err(reason) => record.rejected.push(Rejection { index, reason }),
                        }
                        record.revisions.push(item.raw);
                    }
                }
            }
            record
        };
        report.steps.push(record);
    }

    let prompt = prompt::final_prompt(
        &config.final_instruction,
        &config.query,
        &schema_text,
        &state.final_text(),
    );
    match runner.call(prompt, |_| Ok(())) {
        Ok((call, _)) => {
            report.final_answer = Some(call.raw_output.clone());
            report.final_call = Some(call);
        }
        Err(e) => return Err(fail(report, &runner, &state, "final answer".into(), e)),
    }
    finish(&mut report, &runner, &state);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ScriptedBackend;
    use crate::schema::parse_schema;
    use crate::tokenizer::BuiltinTokenizer;

    fn schema() -> Schema {
        parse_schema(
            r#"{"name":"Notes","root":{"kind":"record","fields":[
                {"name":"facts","type":{"kind":"map","values":"string"}},
                {"name":"count","type":"integer"}]}}"#,
        )
        .unwrap()
    }

    fn config(mode: MemoryMode) -> PipelineConfig {
        PipelineConfig {
            memory_mode: mode,
            chunk_budget: 64,
            task_instruction: "Collect facts.".into(),
            final_instruction: "Answer from memory.".into(),
            query: "What are the facts?".into(),
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn parse_bare_fenced_and_empty() {
        let bare =
            r#"[{"path":"/candidate_functions/cat","op":"add","value":{"purpose":"concatenate"}}]"#;
        let items = parse_revisions(bare).unwrap();
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].revision.as_ref().unwrap().op, Operation::Add);
        let fenced = format!("Sure, here you go [see below]:\n```json\n{bare}\n```\nDone.");
        assert_eq!(parse_revisions(&fenced).unwrap(), items);
        assert!(parse_revisions("[]").unwrap().is_empty());
        assert_eq!(
            parse_revisions("nothing here"),
            Err(ParseError::NoRevisionFound)
        );
        assert_eq!(parse_revisions("[1, 2]"), Err(ParseError::NoRevisionFound));
    }

    #[test]
    fn parse_marks_bad_ops() {
        let items = parse_revisions(
            r#"[{"path":"/a","op":"delete","value":1},{"path":"/a","op":"add","value":1}]"#,
        )
        .unwrap();
        assert!(items[0].revision.is_err());
        assert!(items[1].revision.is_ok());
    }

    #[test]
    fn single_chunk_empty_output_makes_two_calls() {
        let backend = ScriptedBackend::responses(["[]", "no facts"]);
        let report = run(
            &config(MemoryMode::Amendments),
            &schema(),
            "short doc",
            &backend,
            &BuiltinTokenizer,
        )
        .unwrap();
        assert_eq!(backend.served(), 2);
        assert_eq!(report.steps.len(), 1);
        assert_eq!(report.final_memory, serde_json::json!({}));
        assert_eq!(report.final_answer.as_deref(), Some("no facts"));
        assert!(report.completed());
    }

    #[test]
    fn rejects_and_continues() {
        let out = r#"[{"path":"/count","op":"add","value":"three"},{"path":"/count","op":"add","value":3},{"path":"/count","op":"update","value":4}]"#;
        let mut cfg = config(MemoryMode::InPlace);
        cfg.ops_policy = OpsPolicy::AddOnly;
        let backend = ScriptedBackend::responses([out, "3"]);
        let report = run(&cfg, &schema(), "doc", &backend, &BuiltinTokenizer).unwrap();
        let step = &report.steps[0];
        assert_eq!(step.applied, 1);
        assert_eq!(
            step.rejected.iter().map(|r| r.index).collect::<Vec<_>>(),
            [0, 2]
        );
        assert_eq!(step.applied + step.rejected.len(), step.parsed());
        assert_eq!(report.final_memory, serde_json::json!({"count": 3}));
    }

    #[test]
    fn retries_unparseable_output() {
        let mut cfg = config(MemoryMode::Amendments);
        cfg.retry_limit = 1;
        let backend = ScriptedBackend::responses([
            "garbage",
            r#"[{"path":"/count","op":"add","value":1}]"#,
            "ok",
        ]);
        let report = run(&cfg, &schema(), "doc", &backend, &BuiltinTokenizer).unwrap();
        let step = &report.steps[0];
        assert_eq!(step.call.attempts, 2);
        assert_eq!(step.applied, 1);
        // the retry resends an identical prompt, so it is fully reused
        assert_eq!(step.call.reused, step.call.prompt_tokens / 2);

        let backend = ScriptedBackend::responses(["garbage", "still garbage", "ok"]);
        let report = run(&cfg, &schema(), "doc", &backend, &BuiltinTokenizer).unwrap();
        assert!(report.steps[0].parse_error.is_some());
        assert_eq!(report.steps[0].parsed(), 0);
    }

    #[test]
    fn backend_failure_returns_partial_report() {
        let backend = ScriptedBackend::responses(["[]"]);
        let err = run(
            &config(MemoryMode::Amendments),
            &schema(),
            "doc",
            &backend,
            &BuiltinTokenizer,
        )
        .unwrap_err();
        let RunError::Backend {
            stage,
            source,
            partial,
        } = err
        else {
            panic!("wrong error")
        };
        assert_eq!(stage, "final answer");
        assert_eq!(source, BackendError::FixtureExhausted { served: 1 });
        assert_eq!(partial.steps.len(), 1);
        assert!(partial.final_answer.is_none());
        assert!(partial.error.is_some());
    }

    #[test]
    fn natural_language_overwrites() {
        let backend = ScriptedBackend::responses(["first notes", "answer"]);
        let report = run(
            &config(MemoryMode::NaturalLanguageBaseline),
            &schema(),
            "doc",
            &backend,
            &BuiltinTokenizer,
        )
        .unwrap();
        assert_eq!(report.final_memory, Value::String("first notes".into()));
        let final_prompt = &report.final_call.as_ref().unwrap().prompt;
        assert!(final_prompt.contains("first notes\n[END MEMORY]"));
        assert!(!final_prompt.contains("[SCHEMA]"));
    }

    #[test]
    fn ledger_sums_over_calls() {
        let doc = "line of text here\n".repeat(40);
        let backend = ScriptedBackend::new(crate::backend::Script::Annotations {
            marker: "@revision ".into(),
            final_answer: "done".into(),
        });
        let report = run(
            &config(MemoryMode::Amendments),
            &schema(),
            &doc,
            &backend,
            &BuiltinTokenizer,
        )
        .unwrap();
        assert!(report.steps.len() > 1);
        let calls: Vec<&CallRecord> = report
            .steps
            .iter()
            .map(|s| &s.call)
            .chain(report.final_call.as_ref())
            .collect();
        assert_eq!(
            report.ledger.total_encoded,
            calls.iter().map(|c| c.prompt_tokens).sum::<u64>()
        );
        assert_eq!(
            report.ledger.reused,
            calls.iter().map(|c| c.reused).sum::<u64>()
        );
        assert_eq!(
            report.ledger.decoded,
            calls.iter().map(|c| c.output_tokens).sum::<u64>()
        );
        let tsv = report.steps_tsv();
        assert_eq!(tsv.lines().count(), report.steps.len() + 2);
        assert!(tsv.lines().last().unwrap().starts_with("final\t"));
    }

    #[test]
    fn config_checks() {
        let mut cfg = config(MemoryMode::Amendments);
        cfg.chunk_budget = 63;
        assert!(matches!(cfg.validate(), Err(RunError::Config(_))));
        cfg.chunk_budget = 64;
        cfg.context_window = Some(100);
        let backend = ScriptedBackend::responses(Vec::<String>::new());
        assert!(matches!(
            run(&cfg, &schema(), "doc", &backend, &BuiltinTokenizer),
            Err(RunError::Config(_))
        ));
        assert!(matches!(
            run(
                &config(MemoryMode::Amendments),
                &schema(),
                "",
                &backend,
                &BuiltinTokenizer
            ),
            Err(RunError::Document(ChunkError::EmptyDocument))
        ));
    }

    #[test]
    fn config_json_names() {
        let cfg: PipelineConfig = serde_json::from_str(
            r#"{"memory_mode":"natural_language_baseline","ops_policy":"add_only","chunk_budget":128}"#,
        )
        .unwrap();
        assert_eq!(cfg.memory_mode, MemoryMode::NaturalLanguageBaseline);
        assert_eq!(cfg.ops_policy, OpsPolicy::AddOnly);
        assert_eq!(cfg.decode_params.top_k, 40);
    }
}
