//! Shared test support: random schemas, random valid revision streams, and
//! a reference implementation of revision semantics over plain
//! `serde_json::Value` that shares no code with the crate.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

pub use rand::SeedableRng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator-side schema tree.
#[derive(Debug, Clone)]
pub enum Node {
    Int,
    Float,
    Str,
    Bool,
    List(Box<Node>),
    Map(Box<Node>),
    Record(String, Vec<(String, Node)>),
}

impl Node {
    fn descriptor(&self) -> Value {
        match self {
            Node::Int => json!("integer"),
            Node::Float => json!("float"),
            Node::Str => json!("string"),
            Node::Bool => json!("boolean"),
            Node::List(n) => json!({"kind": "list", "items": n.descriptor()}),
            Node::Map(n) => json!({"kind": "map", "values": n.descriptor()}),
            Node::Record(name, fields) => json!({
                "kind": "record",
                "name": name,
                "fields": fields.iter().map(|(f, n)| json!({"name": f, "type": n.descriptor()})).collect::<Vec<_>>(),
            }),
        }
    }

    fn child(&self, seg: &str) -> Option<&Node> {
        match self {
            Node::List(n) | Node::Map(n) => Some(n),
            Node::Record(_, fields) => fields.iter().find(|(f, _)| f == seg).map(|(_, n)| n),
            _ => None,
        }
    }
}

const FIELD_NAMES: [&str; 8] = [
    "alpha", "beta", "gamma", "delta", "notes", "items", "score", "meta",
];
const MAP_KEYS: [&str; 12] = [
    "a", "b", "cat", "x/y", "t~1", "0", "12", "~", "sp ace", "é", "key", "zz",
];

/// A random schema with nesting depth at most `max_depth`, as a descriptor
/// document plus the generator's own tree.
pub fn random_schema(rng: &mut TestRng, max_depth: usize) -> (String, Node) {
    let mut counter = 0;
    let root = if rng.gen_bool(0.75) {
        random_record(rng, 1, max_depth, &mut counter, true)
    } else {
        Node::Map(Box::new(random_node(rng, 1, max_depth, &mut counter)))
    };
    let desc = json!({"name": "Generated", "root": match &root {
        Node::Record(_, fields) => json!({
            "kind": "record",
            "fields": fields.iter().map(|(f, n)| json!({"name": f, "type": n.descriptor()})).collect::<Vec<_>>(),
        }),
        other => other.descriptor(),
    }});
    let root = match root {
        Node::Record(_, f) => Node::Record("Generated".into(), f),
        other => other,
    };
    (desc.to_string(), root)
}

fn random_record(
    rng: &mut TestRng,
    depth: usize,
    max: usize,
    counter: &mut usize,
    root: bool,
) -> Node {
    let mut names: Vec<&str> = FIELD_NAMES.to_vec();
    names.shuffle(rng);
    let n = rng.gen_range(1..=if root { 4 } else { 3 });
    *counter += 1;
    let name = format!("Rec{counter}");
    let fields = names[..n]
        .iter()
        .map(|f| (f.to_string(), random_node(rng, depth + 1, max, counter)))
        .collect();
    Node::Record(name, fields)
}

fn random_node(rng: &mut TestRng, depth: usize, max: usize, counter: &mut usize) -> Node {
    let prim = |rng: &mut TestRng| match rng.gen_range(0..4) {
        0 => Node::Int,
        1 => Node::Float,
        2 => Node::Str,
        _ => Node::Bool,
    };
    if depth >= max || rng.gen_bool(0.35) {
        return prim(rng);
    }
    match rng.gen_range(0..3) {
        0 => Node::List(Box::new(random_node(rng, depth + 1, max, counter))),
        1 => Node::Map(Box::new(random_node(rng, depth + 1, max, counter))),
        _ => random_record(rng, depth, max, counter, false),
    }
}

/// A random value of the given type.
pub fn random_value(rng: &mut TestRng, node: &Node) -> Value {
    match node {
        Node::Int => json!(rng.gen_range(-1000i64..1000)),
        // quarters are exact in binary, so text round trips are lossless
        Node::Float => {
            if rng.gen_bool(0.1) {
                json!(rng.gen_range(-5i64..5))
            } else {
                json!(rng.gen_range(-400i64..400) as f64 / 4.0 + 0.25)
            }
        }
        Node::Str => {
            let choices = [
                "",
                "plain",
                "with \"quotes\"",
                "line\nbreak",
                "tab\tand \\ slash",
                "ünïcödé",
                "{}[]",
            ];
            json!(choices.choose(rng).unwrap())
        }
        Node::Bool => json!(rng.gen_bool(0.5)),
        Node::List(n) => Value::Array(
            (0..rng.gen_range(0..3))
                .map(|_| random_value(rng, n))
                .collect(),
        ),
        Node::Map(n) => {
            let mut m = Map::new();
            for _ in 0..rng.gen_range(0..3) {
                m.insert(
                    MAP_KEYS.choose(rng).unwrap().to_string(),
                    random_value(rng, n),
                );
            }
            Value::Object(m)
        }
        Node::Record(_, fields) => Value::Object(
            fields
                .iter()
                .map(|(f, n)| (f.clone(), random_value(rng, n)))
                .collect(),
        ),
    }
}

pub fn escape(seg: &str) -> String {
    seg.replace('~', "~0").replace('/', "~1")
}

pub fn format_path(segs: &[String]) -> String {
    segs.iter().map(|s| format!("/{}", escape(s))).collect()
}

pub fn parse_path(path: &str) -> Vec<String> {
    path.split('/')
        .skip(1)
        .map(|s| s.replace("~1", "/").replace("~0", "~"))
        .collect()
}

fn get<'a>(state: &'a Value, segs: &[String]) -> Option<&'a Value> {
    segs.iter().try_fold(state, |v, s| match v {
        Value::Object(m) => m.get(s),
        Value::Array(a) => s.parse::<usize>().ok().and_then(|i| a.get(i)),
        _ => None,
    })
}

fn get_mut<'a>(state: &'a mut Value, segs: &[String]) -> Option<&'a mut Value> {
    segs.iter().try_fold(state, |v, s| match v {
        Value::Object(m) => m.get_mut(s),
        Value::Array(a) => s.parse::<usize>().ok().and_then(move |i| a.get_mut(i)),
        _ => None,
    })
}

/// Reference semantics for one valid revision.
pub fn oracle_apply(state: &mut Value, revision: &Value) {
    let segs = parse_path(revision["path"].as_str().unwrap());
    let value = revision["value"].clone();
    let (last, parent) = segs.split_last().unwrap();
    let parent = get_mut(state, parent).expect("parent exists");
    match (revision["op"].as_str().unwrap(), parent) {
        ("add", Value::Object(m)) => {
            assert!(!m.contains_key(last));
            m.insert(last.clone(), value);
        }
        ("add", Value::Array(a)) => {
            assert_eq!(last.parse::<usize>().unwrap(), a.len());
            a.push(value);
        }
        ("update", Value::Object(m)) => *m.get_mut(last).unwrap() = value,
        ("update", Value::Array(a)) => a[last.parse::<usize>().unwrap()] = value,
        other => panic!("invalid revision for oracle: {other:?}"),
    }
}

/// Every position in `state` with its schema node.
fn positions<'a>(
    state: &Value,
    node: &'a Node,
    at: &mut Vec<String>,
    out: &mut Vec<(Vec<String>, &'a Node)>,
) {
    out.push((at.clone(), node));
    match state {
        Value::Object(m) => {
            for (k, v) in m {
                if let Some(child) = node.child(k) {
                    at.push(k.clone());
                    positions(v, child, at, out);
                    at.pop();
                }
            }
        }
        Value::Array(a) => {
            for (i, v) in a.iter().enumerate() {
                at.push(i.to_string());
                positions(v, node.child("").unwrap(), at, out);
                at.pop();
            }
        }
        _ => {}
    }
}

/// A stream of at most `max_len` revisions, each valid against `schema`
/// and the memory produced by its predecessors. Returns the revision
/// objects and the oracle's final state.
pub fn random_stream(rng: &mut TestRng, schema: &Node, max_len: usize) -> (Vec<Value>, Value) {
    let mut state = json!({});
    let mut out = Vec::new();
    let len = rng.gen_range(0..=max_len);
    while out.len() < len {
        let mut all = Vec::new();
        positions(&state, schema, &mut Vec::new(), &mut all);
        let (path, node) = all.choose(rng).unwrap().clone();
        let current = get(&state, &path).unwrap();
        let revision = if !path.is_empty() && rng.gen_bool(0.35) {
            json!({"path": format_path(&path), "op": "update", "value": random_value(rng, node)})
        } else {
            let (seg, child) = match (node, current) {
                (Node::List(n), Value::Array(a)) => (a.len().to_string(), &**n),
                (Node::Map(n), Value::Object(m)) => {
                    let free: Vec<&&str> =
                        MAP_KEYS.iter().filter(|k| !m.contains_key(**k)).collect();
                    let Some(k) = free.choose(rng) else { continue };
                    (k.to_string(), &**n)
                }
                (Node::Record(_, fields), Value::Object(m)) => {
                    let free: Vec<&(String, Node)> =
                        fields.iter().filter(|(f, _)| !m.contains_key(f)).collect();
                    let Some((f, n)) = free.choose(rng) else {
                        continue;
                    };
                    (f.clone(), n)
                }
                _ => continue,
            };
            let mut p = path.clone();
            p.push(seg);
            json!({"path": format_path(&p), "op": "add", "value": random_value(rng, child)})
        };
        oracle_apply(&mut state, &revision);
        out.push(revision);
    }
    (out, state)
}

/// Minimal independent tokenizer: runs of alphanumerics, runs of
/// whitespace, any other single character.
pub fn oracle_tokens(text: &str) -> Vec<&str> {
    #[derive(PartialEq, Clone, Copy)]
    enum Class {
        Word,
        Space,
        Other,
    }
    let class = |c: char| {
        if c.is_alphanumeric() {
            Class::Word
        } else if c.is_whitespace() {
            Class::Space
        } else {
            Class::Other
        }
    };
    let mut out = Vec::new();
    let mut start = 0;
    let mut prev: Option<Class> = None;
    for (i, c) in text.char_indices() {
        let k = class(c);
        if let Some(p) = prev {
            if p != k || k == Class::Other {
                out.push(&text[start..i]);
                start = i;
            }
        }
        prev = Some(k);
    }
    if !text.is_empty() {
        out.push(&text[start..]);
    }
    out
}

/// Ledger totals for a sequence of (prompt, output) calls, by direct
/// token comparison against the previous prompt.
pub fn oracle_ledger<'a>(calls: impl IntoIterator<Item = (&'a str, &'a str)>) -> (u64, u64, u64) {
    let (mut total, mut reused, mut decoded) = (0u64, 0u64, 0u64);
    let mut last: Vec<&str> = Vec::new();
    for (prompt, output) in calls {
        let toks = oracle_tokens(prompt);
        let shared = toks.iter().zip(&last).take_while(|(a, b)| a == b).count();
        total += toks.len() as u64;
        reused += shared as u64;
        decoded += oracle_tokens(output).len() as u64;
        last = toks;
    }
    (total, reused, decoded)
}

pub fn fixtures_dir() -> std::path::PathBuf {
    std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn read(path: std::path::PathBuf) -> String {
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// The 10-chunk scripted run under `fixtures/scripted_run`.
pub struct ScriptedFixture {
    pub schema: structmem::Schema,
    pub document: String,
    pub responses: String,
    pub config: structmem::PipelineConfig,
    pub expected: Value,
}

impl ScriptedFixture {
    pub fn load() -> Self {
        let dir = fixtures_dir().join("scripted_run");
        Self {
            schema: structmem::schema::parse_schema(&read(dir.join("schema.schema.json"))).unwrap(),
            document: read(dir.join("document.txt")),
            responses: read(dir.join("responses.json")),
            config: serde_json::from_str(&read(dir.join("config.json"))).unwrap(),
            expected: serde_json::from_str(&read(dir.join("expected.json"))).unwrap(),
        }
    }

    pub fn run(&self, mode: structmem::MemoryMode) -> structmem::RunReport {
        let mut config = self.config.clone();
        config.memory_mode = mode;
        let backend = structmem::ScriptedBackend::from_json(&self.responses).unwrap();
        structmem::run(
            &config,
            &self.schema,
            &self.document,
            &backend,
            &structmem::BuiltinTokenizer,
        )
        .unwrap()
    }
}

/// The annotated synthetic repository under `fixtures/corpus`.
pub struct Corpus {
    pub schema: structmem::Schema,
    pub document: String,
    pub config: structmem::PipelineConfig,
    pub script: String,
}

impl Corpus {
    pub fn load() -> Self {
        let dir = fixtures_dir().join("corpus");
        Self {
            schema: structmem::bundled::schema("function_match").unwrap(),
            document: read(dir.join("synthetic_repo.txt")),
            config: serde_json::from_str(&read(dir.join("sweep.json"))).unwrap(),
            script: read(dir.join("annotations.json")),
        }
    }

    pub fn run(&self, budget: usize, mode: structmem::MemoryMode) -> structmem::RunReport {
        let mut config = self.config.clone();
        config.chunk_budget = budget;
        config.memory_mode = mode;
        let backend = structmem::ScriptedBackend::from_json(&self.script).unwrap();
        structmem::run(
            &config,
            &self.schema,
            &self.document,
            &backend,
            &structmem::BuiltinTokenizer,
        )
        .unwrap()
    }
}

/// (prompt, output) for every call of a run, final answer last.
pub fn calls(report: &structmem::RunReport) -> Vec<(&str, &str)> {
    report
        .steps
        .iter()
        .map(|s| &s.call)
        .chain(report.final_call.as_ref())
        .map(|c| (c.prompt.as_str(), c.raw_output.as_str()))
        .collect()
}
