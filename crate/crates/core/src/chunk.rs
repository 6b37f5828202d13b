//! Splitting a document into token-budgeted chunks.

use thiserror::Error;

use crate::tokenizer::{is_whitespace_token, Tokenizer};

/// Smallest accepted chunk budget, in tokens.
pub const MIN_CHUNK_BUDGET: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChunkError {
    #[error("document is empty")]
    EmptyDocument,
    #[error("chunk budget {0} is below the minimum of {MIN_CHUNK_BUDGET} tokens")]
    BudgetTooSmall(usize),
}

/// Ordered chunks whose concatenation is the source document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkStream {
    chunks: Vec<String>,
}

impl ChunkStream {
    pub fn chunks(&self) -> &[String] {
        &self.chunks
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn concat(&self) -> String {
        self.chunks.concat()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.chunks.iter().map(String::as_str)
    }
}

/// Greedy packing: each chunk takes up to `budget` tokens, then the cut is
/// pulled back to just after the last newline-bearing whitespace token in
/// the final fifth of the chunk, else after the last whitespace token there,
/// else it stays a hard cut at the budget.
pub fn chunk(
    document: &str,
    budget: usize,
    tokenizer: &dyn Tokenizer,
) -> Result<ChunkStream, ChunkError> {
    if budget < MIN_CHUNK_BUDGET {
        return Err(ChunkError::BudgetTooSmall(budget));
    }
    if document.is_empty() {
        return Err(ChunkError::EmptyDocument);
    }
    let tokens = tokenizer.tokenize(document);
    let surfaces: Vec<&str> = tokens.surfaces().collect();
    let total = surfaces.len();
    let min_cut = budget - budget / 5;

    let mut chunks = Vec::new();
    let mut start = 0;
    while start < total {
        let end = if total - start <= budget {
            total
        } else {
            let hard = start + budget;
            let window = (start + min_cut)..hard;
            let after_newline = window
                .clone()
                .rev()
                .find(|&i| is_whitespace_token(surfaces[i]) && surfaces[i].contains('\n'));
            let after_space = || {
                window
                    .clone()
                    .rev()
                    .find(|&i| is_whitespace_token(surfaces[i]))
            };
            after_newline.or_else(after_space).map_or(hard, |i| i + 1)
        };
        chunks.push(document[tokens.byte_offset(start)..tokens.byte_offset(end)].to_string());
        start = end;
    }
    Ok(ChunkStream { chunks })
}
