//! Tokenizer interface for the prefix tree and decoder.
//!
//! The decoder only needs round-tripping on the chain strings it is given;
//! [`PrefixTree::build`](super::PrefixTree::build) verifies that up front for
//! every candidate. Two implementations are provided: a word-level tokenizer
//! (readable tries, used with the chain linearization which is
//! single-space-separated by construction) and a byte-level tokenizer that
//! round-trips any string.

use std::collections::HashMap;
use std::sync::Mutex;

pub type TokenId = u32;

pub trait Tokenizer: Send + Sync {
    fn encode(&self, text: &str) -> Vec<TokenId>;
    fn decode(&self, tokens: &[TokenId]) -> String;
    fn eos_id(&self) -> TokenId;
}

/// Splits on whitespace; decoding joins words with single spaces. Token ids
/// are interned in first-seen order. Id 0 is reserved for end-of-sequence.
pub struct WhitespaceTokenizer {
    vocab: Mutex<Vocab>,
}

struct Vocab {
    ids: HashMap<String, TokenId>,
    words: Vec<String>,
}

impl WhitespaceTokenizer {
    pub fn new() -> Self {
        WhitespaceTokenizer {
            vocab: Mutex::new(Vocab { ids: HashMap::new(), words: Vec::new() }),
        }
    }
}

impl Default for WhitespaceTokenizer {
    fn default() -> Self {
        Self::new()
    }
}

impl Tokenizer for WhitespaceTokenizer {
    fn encode(&self, text: &str) -> Vec<TokenId> {
        let mut vocab = self.vocab.lock().expect("tokenizer vocab poisoned");
        text.split_whitespace()
            .map(|word| {
                if let Some(&id) = vocab.ids.get(word) {
                    id
                } else {
                    // 0 is eos, so assigned ids start at 1.
                    let id = vocab.words.len() as TokenId + 1;
                    vocab.ids.insert(word.to_string(), id);
                    vocab.words.push(word.to_string());
                    id
                }
            })
            .collect()
    }

    fn decode(&self, tokens: &[TokenId]) -> String {
        let vocab = self.vocab.lock().expect("tokenizer vocab poisoned");
        tokens
            .iter()
            .map(|&id| {
                id.checked_sub(1)
                    .and_then(|i| vocab.words.get(i as usize))
                    .map(|w| w.as_str())
                    .unwrap_or("\u{fffd}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn eos_id(&self) -> TokenId {
        0
    }
}

/// One token per byte; round-trips any UTF-8 string exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct ByteTokenizer;

impl ByteTokenizer {
    pub fn new() -> Self {
        ByteTokenizer
    }
}

impl Tokenizer for ByteTokenizer {
    fn encode(&self, text: &str) -> Vec<TokenId> {
        text.bytes().map(|b| b as TokenId).collect()
    }

    fn decode(&self, tokens: &[TokenId]) -> String {
        let bytes: Vec<u8> = tokens.iter().filter(|&&t| t < 256).map(|&t| t as u8).collect();
        String::from_utf8_lossy(&bytes).into_owned()
    }

    fn eos_id(&self) -> TokenId {
        256
    }
}
