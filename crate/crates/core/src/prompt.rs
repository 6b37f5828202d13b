//! Prompt layout.
//!
//! Every step prompt is `header ++ memory ++ chunk section`. The header
//! (task, query, schema, output instructions) is fixed for a run, and the
//! memory sits before the chunk, so consecutive prompts share at least the
//! header and, with amendments, the whole previous memory.

/// Bumped whenever any template text below changes.
pub const TEMPLATE_VERSION: &str = "structmem-prompt/1";

const MEMORY_OPEN: &str = "[MEMORY]\n";
// Starts with a non-whitespace character so a memory that ends in "\n"
// keeps the same final token whether or not more memory follows.
const MEMORY_CLOSE: &str = "[END MEMORY]\n\n";
const TEXT_OPEN: &str = "[TEXT]\n";
const TEXT_CLOSE: &str = "\n[END TEXT]\n";

/// How the memory is presented to the model, which decides the output
/// instructions in the header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemoryStyle {
    InPlace,
    Amendments,
    NaturalLanguage,
}

const REVISION_FORMAT: &str = "\
Read [TEXT] and propose revisions to [MEMORY] that help answer [QUESTION].
Respond with a JSON array of revision objects and nothing else, for example:
[{\"path\": \"/field/key\", \"op\": \"add\", \"value\": ...}]
Each revision has:
- \"path\": slash-separated keys and list indices from the memory root; write \"~\" as \"~0\" and \"/\" as \"~1\" inside a key.
- \"op\": ";
const OPS_BOTH: &str = "\"add\" to create a path that does not exist yet (a list index equal to the list length appends), or \"update\" to replace the whole value at an existing path.\n";
const OPS_ADD_ONLY: &str = "\"add\" to create a path that does not exist yet (a list index equal to the list length appends). Existing values cannot be changed.\n";
const VALUE_LINE: &str = "- \"value\": a JSON value matching the schema type at that path.\nRespond with [] if the text adds nothing relevant.\n";
const AMENDMENT_NOTE: &str = "The memory is a base JSON object followed by one revision per line. Later lines override earlier values at the same path.\n";
const NL_FORMAT: &str = "\
Read [TEXT] and rewrite [MEMORY] so that it captures everything from the text so far that helps answer [QUESTION].
Respond with the complete new memory as plain text. It replaces the previous memory entirely.
";

/// Builds the output-format instructions for a memory style.
pub fn output_instructions(style: MemoryStyle, add_only: bool) -> String {
    match style {
        MemoryStyle::NaturalLanguage => NL_FORMAT.to_string(),
        MemoryStyle::InPlace | MemoryStyle::Amendments => {
            let mut s = String::from(REVISION_FORMAT);
            s.push_str(if add_only { OPS_ADD_ONLY } else { OPS_BOTH });
            s.push_str(VALUE_LINE);
            if style == MemoryStyle::Amendments {
                s.push_str(AMENDMENT_NOTE);
            }
            s
        }
    }
}

/// The static part of every step prompt in a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptHeader {
    text: String,
}

impl PromptHeader {
    pub fn new(task: &str, query: &str, schema_text: &str, instructions: &str) -> Self {
        let mut text = String::new();
        push_section(&mut text, "TASK", task);
        push_section(&mut text, "QUESTION", query);
        if !schema_text.is_empty() {
            push_section(&mut text, "SCHEMA", schema_text);
        }
        push_section(&mut text, "OUTPUT FORMAT", instructions);
        text.push_str(MEMORY_OPEN);
        Self { text }
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn len(&self) -> usize {
        self.text.len()
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }
}

fn push_section(out: &mut String, title: &str, body: &str) {
    out.push('[');
    out.push_str(title);
    out.push_str("]\n");
    out.push_str(body);
    if !body.ends_with('\n') {
        out.push('\n');
    }
    out.push('\n');
}

/// Header, then memory text, then the chunk.
pub fn assemble_prompt(header: &PromptHeader, memory_text: &str, chunk: &str) -> String {
    let mut out = String::with_capacity(header.len() + memory_text.len() + chunk.len() + 64);
    out.push_str(header.as_str());
    out.push_str(memory_text);
    out.push_str(MEMORY_CLOSE);
    out.push_str(TEXT_OPEN);
    out.push_str(chunk);
    out.push_str(TEXT_CLOSE);
    out
}

/// The chunk text embedded in a step prompt, or `None` for other prompts.
pub fn chunk_section(prompt: &str) -> Option<&str> {
    let body = prompt.strip_suffix(TEXT_CLOSE)?;
    let marker = format!("{MEMORY_CLOSE}{TEXT_OPEN}");
    let at = body.find(&marker)?;
    Some(&body[at + marker.len()..])
}

/// Prompt for the final answer over the finished memory.
pub fn final_prompt(
    final_instruction: &str,
    query: &str,
    schema_text: &str,
    memory_text: &str,
) -> String {
    let mut out = String::new();
    push_section(&mut out, "TASK", final_instruction);
    push_section(&mut out, "QUESTION", query);
    if !schema_text.is_empty() {
        push_section(&mut out, "SCHEMA", schema_text);
    }
    out.push_str(MEMORY_OPEN);
    out.push_str(memory_text);
    out.push_str(MEMORY_CLOSE);
    out.push_str("[ANSWER]\n");
    out
}
