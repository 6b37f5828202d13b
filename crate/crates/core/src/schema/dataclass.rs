//! Dataclass-style schema text.
//!
//! The prompt shows schemas as Python dataclass declarations; models asked to
//! write a schema answer in the same style. This module renders a [`Schema`]
//! in that style and parses such declarations back, tolerating the loose
//! indentation and decorator/base-class noise found in hand-written or
//! generated listings.
//!
//! Rendering layout: two-space indentation, a record type is declared inside
//! the first class whose fields reference it, field docs become trailing
//! `# ...` comments. A map-rooted schema renders as an alias line
//! `Name = dict[str, T]` followed by its docstring.

use std::collections::{HashMap, HashSet};

use super::descriptor::is_identifier;
use super::{Field, Record, Schema, SchemaError, SchemaNode};

const DECORATOR: &str = "@dataclasses.dataclass";
const RESERVED: &[&str] = &[
    "str", "int", "float", "bool", "list", "dict", "List", "Dict",
    // keywords; `from`/`import` lines would also be skipped as imports
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import",
    "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
    "with", "yield",
];

/// Deterministic dataclass-like text for the prompt header.
pub fn render_for_prompt(schema: &Schema) -> String {
    let mut out = String::new();
    let mut declared = HashSet::new();
    match schema.root() {
        SchemaNode::Record(r) => render_class(r, 0, &mut declared, &mut out),
        root => {
            for rec in referenced_records(root) {
                if declared.contains(rec.name.as_str()) {
                    continue;
                }
                render_class(rec, 0, &mut declared, &mut out);
                out.push('\n');
            }
            out.push_str(schema.name());
            out.push_str(" = ");
            out.push_str(&type_expr(root));
            out.push('\n');
            if !schema.doc().is_empty() {
                push_docstring(schema.doc(), "", &mut out);
            }
        }
    }
    out
}

fn render_class<'a>(
    record: &'a Record,
    indent: usize,
    declared: &mut HashSet<&'a str>,
    out: &mut String,
) {
    declared.insert(record.name.as_str());
    let pad = " ".repeat(indent);
    let inner = " ".repeat(indent + 2);
    out.push_str(&pad);
    out.push_str(DECORATOR);
    out.push('\n');
    out.push_str(&pad);
    out.push_str("class ");
    out.push_str(&record.name);
    out.push_str(":\n");
    if !record.doc.is_empty() {
        push_docstring(&record.doc, &inner, out);
    }
    let mut nested = false;
    for field in &record.fields {
        for rec in referenced_records(&field.node) {
            if declared.contains(rec.name.as_str()) {
                continue;
            }
            out.push('\n');
            render_class(rec, indent + 2, declared, out);
            nested = true;
        }
    }
    if nested && !record.fields.is_empty() {
        out.push('\n');
    }
    for field in &record.fields {
        out.push_str(&inner);
        out.push_str(&field.name);
        out.push_str(": ");
        out.push_str(&type_expr(&field.node));
        if !field.doc.is_empty() {
            out.push_str("  # ");
            out.push_str(&field.doc);
        }
        out.push('\n');
    }
    if record.doc.is_empty() && record.fields.is_empty() {
        out.push_str(&inner);
        out.push_str("pass\n");
    }
}

fn push_docstring(doc: &str, pad: &str, out: &mut String) {
    out.push_str(pad);
    out.push_str("\"\"\"");
    for c in doc.chars() {
        match c {
            '\\' | '"' => {
                out.push('\\');
                out.push(c);
            }
            // a bare carriage return would be lost to line splitting
            '\r' => out.push_str("\\r"),
            _ => out.push(c),
        }
    }
    out.push_str("\"\"\"\n");
}

/// Records reachable from `node` without passing through another record.
fn referenced_records(node: &SchemaNode) -> Vec<&Record> {
    match node {
        SchemaNode::Record(r) => vec![r],
        SchemaNode::List(inner) | SchemaNode::Map(inner) => referenced_records(inner),
        _ => vec![],
    }
}

fn type_expr(node: &SchemaNode) -> String {
    match node {
        SchemaNode::Integer => "int".into(),
        SchemaNode::Float => "float".into(),
        SchemaNode::String => "str".into(),
        SchemaNode::Boolean => "bool".into(),
        SchemaNode::List(items) => format!("list[{}]", type_expr(items)),
        SchemaNode::Map(values) => format!("dict[str, {}]", type_expr(values)),
        SchemaNode::Record(r) => r.name.clone(),
    }
}

/// Record type names must be unique per shape so the rendering is
/// unambiguous, and must not shadow builtin type names.
pub(crate) fn check_type_names(schema: &Schema) -> Result<(), SchemaError> {
    fn walk<'a>(
        node: &'a SchemaNode,
        seen: &mut HashMap<&'a str, &'a Record>,
    ) -> Result<(), SchemaError> {
        match node {
            SchemaNode::List(inner) | SchemaNode::Map(inner) => walk(inner, seen),
            SchemaNode::Record(r) => {
                if RESERVED.contains(&r.name.as_str()) {
                    return Err(SchemaError::Syntax {
                        location: r.name.clone(),
                        message: "record name is a reserved name".into(),
                    });
                }
                match seen.get(r.name.as_str()) {
                    Some(prev) if *prev != r => {
                        return Err(SchemaError::ConflictingTypeName {
                            name: r.name.clone(),
                        })
                    }
                    Some(_) => return Ok(()),
                    None => {
                        seen.insert(&r.name, r);
                    }
                }
                for f in &r.fields {
                    walk(&f.node, seen)?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
    let mut seen = HashMap::new();
    if !matches!(schema.root(), SchemaNode::Record(_)) && RESERVED.contains(&schema.name()) {
        return Err(SchemaError::Syntax {
            location: schema.name().into(),
            message: "schema name is a reserved name".into(),
        });
    }
    walk(schema.root(), &mut seen)?;
    // An alias name occupies the same namespace as record names.
    if !matches!(schema.root(), SchemaNode::Record(_)) && seen.contains_key(schema.name()) {
        return Err(SchemaError::ConflictingTypeName {
            name: schema.name().into(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
enum TypeExpr {
    Name(String),
    Generic(String, Vec<TypeExpr>),
}

#[derive(Debug)]
struct FieldDecl {
    name: String,
    ty: TypeExpr,
    doc: String,
    line: usize,
}

#[derive(Debug)]
struct ClassDecl {
    name: String,
    doc: Option<String>,
    fields: Vec<FieldDecl>,
}

#[derive(Debug)]
struct AliasDecl {
    name: String,
    ty: TypeExpr,
    doc: Option<String>,
    line: usize,
}

#[derive(Debug, Clone, Copy)]
enum TopDecl {
    Class(usize),
    Alias(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Prev {
    ClassHeader(usize),
    Alias(usize),
    Other,
}

fn err_at(line: usize, message: impl Into<String>) -> SchemaError {
    SchemaError::Syntax {
        location: format!("line {}", line + 1),
        message: message.into(),
    }
}

/// Parses dataclass-style declarations into a schema.
///
/// The root is the last top-level declaration that no other declaration
/// references.
pub fn parse_dataclass(text: &str) -> Result<Schema, SchemaError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut classes: Vec<ClassDecl> = Vec::new();
    let mut class_index: HashMap<String, usize> = HashMap::new();
    let mut aliases: Vec<AliasDecl> = Vec::new();
    let mut top: Vec<TopDecl> = Vec::new();
    let mut stack: Vec<(usize, usize)> = Vec::new();
    let mut prev = Prev::Other;

    let mut i = 0;
    while i < lines.len() {
        let raw = lines[i];
        let body = raw.trim_start();
        if body.is_empty() || body.starts_with('#') {
            i += 1;
            continue;
        }
        let indent = raw.len() - body.len();
        while matches!(stack.last(), Some(&(ci, _)) if ci >= indent) {
            stack.pop();
        }

        if body.starts_with('@') {
            i += 1;
            continue;
        }

        if let Some(quote) = docstring_quote(body) {
            let (content, consumed) = read_docstring(&lines, i, indent, quote)?;
            match prev {
                Prev::ClassHeader(idx) if stack.last().map(|s| s.1) == Some(idx) => {
                    classes[idx].doc = Some(content);
                }
                Prev::Alias(idx) if stack.is_empty() => aliases[idx].doc = Some(content),
                _ => {}
            }
            prev = Prev::Other;
            i += consumed;
            continue;
        }

        if let Some(rest) = body.strip_prefix("class ") {
            let (code, _) = split_comment(rest);
            let code = code.trim_end();
            let header = code
                .strip_suffix(':')
                .ok_or_else(|| err_at(i, "class header must end with ':'"))?;
            let name = header.split('(').next().unwrap_or_default().trim();
            if !is_identifier(name) {
                return Err(err_at(i, format!("`{name}` is not a class name")));
            }
            if RESERVED.contains(&name) {
                return Err(err_at(i, format!("class name `{name}` is a reserved name")));
            }
            if class_index.contains_key(name) {
                return Err(SchemaError::ConflictingTypeName { name: name.into() });
            }
            let idx = classes.len();
            classes.push(ClassDecl {
                name: name.into(),
                doc: None,
                fields: vec![],
            });
            class_index.insert(name.into(), idx);
            if stack.is_empty() {
                top.push(TopDecl::Class(idx));
            }
            stack.push((indent, idx));
            prev = Prev::ClassHeader(idx);
            i += 1;
            continue;
        }

        let (code, comment) = split_comment(body);
        let code = code.trim_end();
        if code == "pass" || code == "..." {
            prev = Prev::Other;
            i += 1;
            continue;
        }
        if stack.is_empty() && (code.starts_with("import ") || code.starts_with("from ")) {
            i += 1;
            continue;
        }

        if let Some((lhs, rhs)) = code.split_once(':') {
            let name = lhs.trim();
            if is_identifier(name) {
                let &(_, owner) = stack
                    .last()
                    .ok_or_else(|| err_at(i, "field declared outside a class"))?;
                let type_text = rhs.split('=').next().unwrap_or_default();
                let ty = parse_type_expr(type_text).map_err(|m| err_at(i, m))?;
                let class = &mut classes[owner];
                if class.fields.iter().any(|f| f.name == name) {
                    return Err(SchemaError::DuplicateField {
                        record: class.name.clone(),
                        field: name.into(),
                        location: format!("line {}", i + 1),
                    });
                }
                class.fields.push(FieldDecl {
                    name: name.into(),
                    ty,
                    doc: comment.map(str::trim).unwrap_or_default().to_string(),
                    line: i,
                });
                prev = Prev::Other;
                i += 1;
                continue;
            }
        }

        if stack.is_empty() {
            if let Some((lhs, rhs)) = code.split_once('=') {
                let name = lhs.trim();
                if is_identifier(name) {
                    if RESERVED.contains(&name) {
                        return Err(err_at(i, format!("alias `{name}` is a reserved name")));
                    }
                    let ty = parse_type_expr(rhs).map_err(|m| err_at(i, m))?;
                    let idx = aliases.len();
                    aliases.push(AliasDecl {
                        name: name.into(),
                        ty,
                        doc: None,
                        line: i,
                    });
                    top.push(TopDecl::Alias(idx));
                    prev = Prev::Alias(idx);
                    i += 1;
                    continue;
                }
            }
        }

        return Err(err_at(i, format!("unrecognized line `{}`", code)));
    }

    let root = pick_root(&top, &classes, &aliases)
        .ok_or_else(|| err_at(lines.len().saturating_sub(1), "no class declaration found"))?;

    let resolver = Resolver {
        classes: &classes,
        class_index: &class_index,
        aliases: &aliases,
    };
    match root {
        TopDecl::Class(idx) => {
            let record = resolver.record(idx, &mut Vec::new())?;
            Schema::new(
                record.name.clone(),
                record.doc.clone(),
                SchemaNode::Record(record),
            )
        }
        TopDecl::Alias(idx) => {
            let alias = &aliases[idx];
            let node = resolver.resolve(&alias.ty, alias.line, &mut vec![alias.name.clone()])?;
            Schema::new(
                alias.name.clone(),
                alias.doc.clone().unwrap_or_default(),
                node,
            )
        }
    }
}

fn docstring_quote(body: &str) -> Option<&'static str> {
    let body = body.strip_prefix(['r', 'R']).unwrap_or(body);
    if body.starts_with("\"\"\"") {
        Some("\"\"\"")
    } else if body.starts_with("'''") {
        Some("'''")
    } else {
        None
    }
}

/// Returns the unescaped docstring content and the number of lines used.
fn read_docstring(
    lines: &[&str],
    start: usize,
    indent: usize,
    quote: &str,
) -> Result<(String, usize), SchemaError> {
    let first = &lines[start][indent..];
    let open = first.find(quote).expect("caller checked the quote");
    let mut raw = String::new();
    let mut text = &first[open + 3..];
    let mut line = start;
    loop {
        if let Some(end) = find_closing(text, quote) {
            raw.push_str(&text[..end]);
            let trailing = text[end + 3..].trim();
            if !trailing.is_empty() && !trailing.starts_with('#') {
                return Err(err_at(line, "unexpected text after docstring"));
            }
            return Ok((unescape(&raw), line - start + 1));
        }
        raw.push_str(text);
        raw.push('\n');
        line += 1;
        if line >= lines.len() {
            return Err(err_at(start, "unterminated docstring"));
        }
        text = lines[line];
    }
}

fn find_closing(text: &str, quote: &str) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'\\' {
            i += 2;
            continue;
        }
        if bytes[i..].starts_with(quote.as_bytes()) {
            return Some(i);
        }
        i += 1;
    }
    None
}

fn unescape(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars().peekable();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.peek() {
                Some(&n @ ('\\' | '"' | '\'')) => {
                    out.push(n);
                    chars.next();
                }
                Some('r') => {
                    out.push('\r');
                    chars.next();
                }
                _ => out.push('\\'),
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn split_comment(code: &str) -> (&str, Option<&str>) {
    match code.find('#') {
        Some(pos) => (&code[..pos], Some(&code[pos + 1..])),
        None => (code, None),
    }
}

fn parse_type_expr(text: &str) -> Result<TypeExpr, String> {
    let mut parser = TypeParser {
        s: text.as_bytes(),
        pos: 0,
    };
    let ty = parser.expr()?;
    parser.skip_ws();
    if parser.pos != parser.s.len() {
        return Err(format!("unexpected text in type `{}`", text.trim()));
    }
    Ok(ty)
}

struct TypeParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl TypeParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, b: u8) -> bool {
        self.skip_ws();
        if self.s.get(self.pos) == Some(&b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn name(&mut self) -> Result<String, String> {
        self.skip_ws();
        let quote = match self.s.get(self.pos) {
            Some(&q @ (b'"' | b'\'')) => {
                self.pos += 1;
                Some(q)
            }
            _ => None,
        };
        let start = self.pos;
        while self.pos < self.s.len()
            && (self.s[self.pos].is_ascii_alphanumeric() || matches!(self.s[self.pos], b'_' | b'.'))
        {
            self.pos += 1;
        }
        let dotted = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii");
        if let Some(q) = quote {
            if self.s.get(self.pos) != Some(&q) {
                return Err("unterminated quoted type name".into());
            }
            self.pos += 1;
        }
        let name = dotted.rsplit('.').next().unwrap_or_default();
        if !is_identifier(name) {
            return Err("expected a type name".into());
        }
        Ok(name.to_string())
    }

    fn expr(&mut self) -> Result<TypeExpr, String> {
        let name = self.name()?;
        if !self.eat(b'[') {
            return Ok(TypeExpr::Name(name));
        }
        let mut args = vec![self.expr()?];
        while self.eat(b',') {
            args.push(self.expr()?);
        }
        if !self.eat(b']') {
            return Err("expected ']'".into());
        }
        Ok(TypeExpr::Generic(name, args))
    }
}

fn type_names(ty: &TypeExpr, out: &mut HashSet<String>) {
    match ty {
        TypeExpr::Name(n) => {
            out.insert(n.clone());
        }
        TypeExpr::Generic(n, args) => {
            out.insert(n.clone());
            for a in args {
                type_names(a, out);
            }
        }
    }
}

fn pick_root(top: &[TopDecl], classes: &[ClassDecl], aliases: &[AliasDecl]) -> Option<TopDecl> {
    let mut referenced = HashSet::new();
    for c in classes {
        for f in &c.fields {
            type_names(&f.ty, &mut referenced);
        }
    }
    for a in aliases {
        type_names(&a.ty, &mut referenced);
    }
    let name_of = |d: &TopDecl| match *d {
        TopDecl::Class(i) => &classes[i].name,
        TopDecl::Alias(i) => &aliases[i].name,
    };
    top.iter()
        .rev()
        .find(|d| !referenced.contains(name_of(d)))
        .or(top.last())
        .copied()
}

struct Resolver<'a> {
    classes: &'a [ClassDecl],
    class_index: &'a HashMap<String, usize>,
    aliases: &'a [AliasDecl],
}

impl Resolver<'_> {
    fn record(&self, idx: usize, visiting: &mut Vec<String>) -> Result<Record, SchemaError> {
        let class = &self.classes[idx];
        if visiting.contains(&class.name) {
            return Err(SchemaError::RecursiveType {
                name: class.name.clone(),
            });
        }
        visiting.push(class.name.clone());
        let mut fields = Vec::with_capacity(class.fields.len());
        for f in &class.fields {
            fields.push(Field {
                name: f.name.clone(),
                node: self.resolve(&f.ty, f.line, visiting)?,
                doc: f.doc.clone(),
            });
        }
        visiting.pop();
        Ok(Record {
            name: class.name.clone(),
            doc: class.doc.clone().unwrap_or_default(),
            fields,
        })
    }

    fn resolve(
        &self,
        ty: &TypeExpr,
        line: usize,
        visiting: &mut Vec<String>,
    ) -> Result<SchemaNode, SchemaError> {
        let unknown = |name: &str| SchemaError::UnknownTypeName {
            name: name.to_string(),
            location: format!("line {}", line + 1),
        };
        match ty {
            TypeExpr::Name(name) => match name.as_str() {
                "str" => Ok(SchemaNode::String),
                "int" => Ok(SchemaNode::Integer),
                "float" => Ok(SchemaNode::Float),
                "bool" => Ok(SchemaNode::Boolean),
                "list" | "List" | "dict" | "Dict" => {
                    Err(err_at(line, format!("`{name}` needs type arguments")))
                }
                other => {
                    if let Some(&idx) = self.class_index.get(other) {
                        return Ok(SchemaNode::Record(self.record(idx, visiting)?));
                    }
                    if let Some(alias) = self.aliases.iter().find(|a| a.name == other) {
                        if visiting.iter().any(|v| v == other) {
                            return Err(SchemaError::RecursiveType { name: other.into() });
                        }
                        visiting.push(other.into());
                        let node = self.resolve(&alias.ty, alias.line, visiting)?;
                        visiting.pop();
                        return Ok(node);
                    }
                    Err(unknown(other))
                }
            },
            TypeExpr::Generic(name, args) => match (name.as_str(), args.as_slice()) {
                ("list" | "List" | "Sequence", [item]) => {
                    Ok(SchemaNode::list(self.resolve(item, line, visiting)?))
                }
                ("dict" | "Dict" | "Mapping", [key, value]) => {
                    if *key != TypeExpr::Name("str".into()) {
                        return Err(err_at(line, "map keys must be `str`"));
                    }
                    Ok(SchemaNode::map(self.resolve(value, line, visiting)?))
                }
                ("list" | "List" | "Sequence" | "dict" | "Dict" | "Mapping", _) => Err(err_at(
                    line,
                    format!("wrong number of type arguments for `{name}`"),
                )),
                (other, _) => Err(unknown(other)),
            },
        }
    }
}
