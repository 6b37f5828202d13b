//! Deterministic, lossless tokenization used for all token accounting.

use std::hash::Hasher;
use std::ops::Range;

use fnv::FnvHasher;

pub type TokenId = u64;

/// A tokenized string. Token ids are stable hashes of the token surface, so
/// equal ids mean equal surfaces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq {
    ids: Vec<TokenId>,
    /// End byte offset of each token in `source`.
    ends: Vec<usize>,
    source: String,
}

impl TokenSeq {
    pub fn ids(&self) -> &[TokenId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn source_text(&self) -> &str {
        &self.source
    }

    /// Byte range of token `i` in the source text.
    pub fn span(&self, i: usize) -> Range<usize> {
        let start = if i == 0 { 0 } else { self.ends[i - 1] };
        start..self.ends[i]
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> + '_ {
        (0..self.len()).map(move |i| &self.source[self.span(i)])
    }

    /// Concatenation of the token surfaces.
    pub fn detokenize(&self) -> String {
        self.surfaces().collect()
    }

    /// Byte offset where the first `n` tokens end.
    pub fn byte_offset(&self, n: usize) -> usize {
        if n == 0 {
            0
        } else {
            self.ends[n - 1]
        }
    }
}

/// A tokenizer usable for accounting and chunking.
pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> TokenSeq;

    fn count(&self, text: &str) -> usize {
        self.tokenize(text).len()
    }
}

/// Splits text into maximal runs of letters and digits, maximal runs of
/// whitespace, and single punctuation or symbol characters.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinTokenizer;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Class {
    Word,
    Space,
    Other,
}

fn class_of(c: char) -> Class {
    if c.is_alphanumeric() {
        Class::Word
    } else if c.is_whitespace() {
        Class::Space
    } else {
        Class::Other
    }
}

pub(crate) fn token_id(surface: &str) -> TokenId {
    let mut h = FnvHasher::default();
    h.write(surface.as_bytes());
    h.finish()
}

impl Tokenizer for BuiltinTokenizer {
    fn tokenize(&self, text: &str) -> TokenSeq {
        let mut ends = Vec::new();
        let mut prev: Option<Class> = None;
        for (offset, c) in text.char_indices() {
            let class = class_of(c);
            let continues = matches!(prev, Some(p) if p == class && class != Class::Other);
            if !continues && offset > 0 {
                ends.push(offset);
            }
            prev = Some(class);
        }
        if !text.is_empty() {
            ends.push(text.len());
        }
        let mut start = 0;
        let ids = ends
            .iter()
            .map(|&end| {
                let id = token_id(&text[start..end]);
                start = end;
                id
            })
            .collect();
        TokenSeq {
            ids,
            ends,
            source: text.to_string(),
        }
    }
}

/// Whether a token surface is pure whitespace.
pub fn is_whitespace_token(surface: &str) -> bool {
    !surface.is_empty() && surface.chars().all(char::is_whitespace)
}

/// Length of the longest common prefix of two token sequences.
pub fn common_prefix_len(a: &[TokenId], b: &[TokenId]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}
