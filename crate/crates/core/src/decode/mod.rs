//! Constrained decoding of evidence chains over a token prefix tree.
//!
//! Candidate chain strings are organized into a [`PrefixTree`]; beam search
//! then asks a [`TokenScorer`] for next-token log-probabilities restricted to
//! the tokens that keep the output a valid tree prefix. A chain is emitted
//! only when a terminal is reached and end-of-sequence is chosen, so every
//! emitted chain is byte-equal to one of the input candidates no matter what
//! the scorer does. That faithfulness guarantee is the point of this module.

mod beam;
mod scorer;
mod tokenizer;
mod trie;

pub use beam::{constrained_beam_search, DecodedChain};
pub use scorer::{MockTableScorer, RemoteCompletionScorer, RemoteScorerConfig, SeededScorer, TokenScorer};
pub use tokenizer::{ByteTokenizer, TokenId, Tokenizer, WhitespaceTokenizer};
pub use trie::PrefixTree;

use serde::{Deserialize, Serialize};

use crate::graph::{CandidatePath, OrientedTriple};

#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    #[error("candidate list must be non-empty")]
    EmptyCandidates,
    #[error("duplicate candidate chain: {0}")]
    DuplicateCandidate(String),
    #[error("tokenizer does not round-trip candidate: {candidate:?}")]
    TokenizerRoundTrip { candidate: String },
    #[error("candidate encodes to the end-of-sequence token: {candidate:?}")]
    EosCollision { candidate: String },
    #[error("prefix is not a valid tree prefix")]
    InvalidPrefix,
    #[error("beam width must be at least 1")]
    InvalidBeamWidth,
    #[error("scorer violated its contract: {0}")]
    ScorerViolation(String),
    #[error("decoder reached a state with no allowed continuation")]
    DeadEnd,
    #[error("scorer endpoint error{}: {message}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Http { status: Option<u16>, retryable: bool, message: String },
}

/// A decoded chain joined back to the candidate path it names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceChain {
    /// Index into the candidate list handed to [`PrefixTree::build`].
    pub chain_index: usize,
    /// Decoded surface form; byte-equal to the candidate's linearization.
    pub text: String,
    pub total_logprob: f64,
    pub steps: Vec<OrientedTriple>,
}

impl EvidenceChain {
    pub fn from_decoded(decoded: &DecodedChain, path: &CandidatePath) -> Self {
        EvidenceChain {
            chain_index: decoded.chain_index,
            text: decoded.text.clone(),
            total_logprob: decoded.total_logprob,
            steps: path.steps.clone(),
        }
    }
}
