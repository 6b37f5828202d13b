//! Single-slot prefix KV cache model and token ledger.
//!
//! The cache remembers only the most recently encoded prompt. Encoding a new
//! prompt reuses the activations of its longest token prefix shared with
//! that prompt; everything after the first differing token is re-encoded.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tokenizer::{common_prefix_len, TokenId, TokenSeq};

/// Output tokens are priced at this multiple of input tokens.
pub const OUTPUT_PRICE_RATIO: f64 = 3.0;
const COST_SCALE: f64 = 1e6;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CacheState {
    last_prompt: Option<Vec<TokenId>>,
}

impl CacheState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn last_prompt(&self) -> Option<&[TokenId]> {
        self.last_prompt.as_deref()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLedger {
    pub total_encoded: u64,
    pub reused: u64,
    pub decoded: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("cache hit rate is undefined when no tokens were encoded")]
pub struct DivisionUndefined;

impl TokenLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn net_encoded(&self) -> u64 {
        self.total_encoded - self.reused
    }

    /// Accounts one prompt against the cache and makes it the cached prompt.
    /// Returns the number of reused tokens.
    pub fn record_encode(&mut self, cache: &mut CacheState, prompt: &TokenSeq) -> u64 {
        let reused = cache
            .last_prompt
            .as_deref()
            .map_or(0, |last| common_prefix_len(last, prompt.ids())) as u64;
        self.total_encoded += prompt.len() as u64;
        self.reused += reused;
        cache.last_prompt = Some(prompt.ids().to_vec());
        reused
    }

    pub fn record_decode(&mut self, output: &TokenSeq) {
        self.decoded += output.len() as u64;
    }

    /// `(net encoded + 3 × decoded) / 10⁶`.
    pub fn cost_index(&self) -> f64 {
        cost_index(self.net_encoded() as f64, self.decoded as f64)
    }

    pub fn cache_hit_rate(&self) -> Result<f64, DivisionUndefined> {
        if self.total_encoded == 0 {
            Err(DivisionUndefined)
        } else {
            Ok(self.reused as f64 / self.total_encoded as f64)
        }
    }

    pub fn report(&self) -> LedgerReport {
        LedgerReport {
            total_encoded: self.total_encoded,
            reused: self.reused,
            net_encoded: self.net_encoded(),
            decoded: self.decoded,
            cache_hit_rate: self.cache_hit_rate().ok(),
            cost_index: self.cost_index(),
        }
    }
}

/// Cost index from raw net-encoded and decoded token counts.
pub fn cost_index(net_encoded: f64, decoded: f64) -> f64 {
    (net_encoded + OUTPUT_PRICE_RATIO * decoded) / COST_SCALE
}

impl std::ops::AddAssign for TokenLedger {
    fn add_assign(&mut self, rhs: Self) {
        self.total_encoded += rhs.total_encoded;
        self.reused += rhs.reused;
        self.decoded += rhs.decoded;
    }
}

/// JSON export of a ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerReport {
    pub total_encoded: u64,
    pub reused: u64,
    pub net_encoded: u64,
    pub decoded: u64,
    /// `null` when nothing was encoded.
    pub cache_hit_rate: Option<f64>,
    pub cost_index: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::{BuiltinTokenizer, Tokenizer};

    fn seq(text: &str) -> TokenSeq {
        BuiltinTokenizer.tokenize(text)
    }

    #[test]
    fn cold_cache_reuses_nothing() {
        let mut ledger = TokenLedger::new();
        let mut cache = CacheState::new();
        assert_eq!(ledger.record_encode(&mut cache, &seq("a b c")), 0);
        assert_eq!(ledger.total_encoded, 5);
        assert_eq!(ledger.cache_hit_rate(), Ok(0.0));
    }

    #[test]
    fn identical_prompts_fully_reused() {
        let mut ledger = TokenLedger::new();
        let mut cache = CacheState::new();
        let p = seq("one two three");
        ledger.record_encode(&mut cache, &p);
        assert_eq!(ledger.record_encode(&mut cache, &p), p.len() as u64);
    }

    #[test]
    fn divergence_at_token_seven() {
        // Punctuation marks are one token each: 20 tokens.
        let a = "!#$%&()*+,-./:;<=>?@";
        let mut b = a.to_string();
        b.replace_range(7..8, "^");
        let (ta, tb) = (seq(a), seq(&b));
        assert_eq!((ta.len(), tb.len()), (20, 20));
        let brute = (0..20).find(|&i| ta.ids()[i] != tb.ids()[i]).unwrap();
        assert_eq!(brute, 7);
        let mut ledger = TokenLedger::new();
        let mut cache = CacheState::new();
        ledger.record_encode(&mut cache, &ta);
        assert_eq!(ledger.record_encode(&mut cache, &tb), 7);
        assert_eq!(ledger.total_encoded, 40);
    }

    #[test]
    fn single_slot() {
        let mut ledger = TokenLedger::new();
        let mut cache = CacheState::new();
        ledger.record_encode(&mut cache, &seq("x y z"));
        ledger.record_encode(&mut cache, &seq("q"));
        // "x y z" is no longer cached.
        assert_eq!(ledger.record_encode(&mut cache, &seq("x y z")), 0);
    }

    #[test]
    fn decode_is_additive() {
        let mut ledger = TokenLedger::new();
        ledger.record_decode(&seq(""));
        assert_eq!(ledger.decoded, 0);
        ledger.record_decode(&seq("a b c"));
        ledger.record_decode(&seq("a b c d"));
        assert_eq!(ledger.decoded, 12);
    }

    #[test]
    fn cost_index_values() {
        assert!((cost_index(248_000.0, 141_000.0) - 0.671).abs() < 1e-12);
        assert!((cost_index(171_000.0, 47_000.0) - 0.312).abs() < 1e-12);
        assert_eq!(TokenLedger::new().cost_index(), 0.0);
    }

    #[test]
    fn hit_rate_undefined_without_encoding() {
        assert_eq!(TokenLedger::new().cache_hit_rate(), Err(DivisionUndefined));
        let full = TokenLedger {
            total_encoded: 10,
            reused: 10,
            decoded: 0,
        };
        assert_eq!(full.cache_hit_rate(), Ok(1.0));
        assert_eq!(TokenLedger::new().report().cache_hit_rate, None);
    }
}
