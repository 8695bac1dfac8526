//! Token-level prefix tree over candidate chain strings.
//!
//! Every root-to-terminal token sequence corresponds to exactly one
//! candidate. A candidate that is a strict prefix of another is handled by a
//! terminal flag on the inner node, not by leaf position: at such a node the
//! allowed continuations include both end-of-sequence and the next tokens of
//! the longer candidates.

use std::collections::BTreeMap;

use super::tokenizer::{TokenId, Tokenizer};
use super::DecodeError;

#[derive(Debug, Default)]
struct TrieNode {
    children: BTreeMap<TokenId, usize>,
    /// Index of the candidate that ends exactly here, if any.
    terminal: Option<usize>,
}

#[derive(Debug)]
pub struct PrefixTree {
    nodes: Vec<TrieNode>,
    eos_id: TokenId,
    chain_count: usize,
}

impl PrefixTree {
    /// Build from deduplicated candidate strings, verifying that the
    /// tokenizer round-trips every candidate (a decoded emission must be
    /// byte-equal to its candidate for the faithfulness guarantee to hold).
    pub fn build(candidates: &[String], tokenizer: &dyn Tokenizer) -> Result<Self, DecodeError> {
        if candidates.is_empty() {
            return Err(DecodeError::EmptyCandidates);
        }
        let eos_id = tokenizer.eos_id();
        let mut tree = PrefixTree {
            nodes: vec![TrieNode::default()],
            eos_id,
            chain_count: candidates.len(),
        };
        let mut seen = std::collections::BTreeSet::new();
        for (index, candidate) in candidates.iter().enumerate() {
            if !seen.insert(candidate.as_str()) {
                return Err(DecodeError::DuplicateCandidate(candidate.clone()));
            }
            let tokens = tokenizer.encode(candidate);
            if tokenizer.decode(&tokens) != *candidate {
                return Err(DecodeError::TokenizerRoundTrip { candidate: candidate.clone() });
            }
            if tokens.contains(&eos_id) {
                return Err(DecodeError::EosCollision { candidate: candidate.clone() });
            }
            let mut node = 0usize;
            for token in tokens {
                node = match tree.nodes[node].children.get(&token) {
                    Some(&child) => child,
                    None => {
                        let child = tree.nodes.len();
                        tree.nodes.push(TrieNode::default());
                        tree.nodes[node].children.insert(token, child);
                        child
                    }
                };
            }
            if tree.nodes[node].terminal.is_some() {
                // Distinct strings encoding to the same tokens would have
                // failed the round-trip check above.
                return Err(DecodeError::DuplicateCandidate(candidate.clone()));
            }
            tree.nodes[node].terminal = Some(index);
        }
        Ok(tree)
    }

    pub fn eos_id(&self) -> TokenId {
        self.eos_id
    }

    pub fn chain_count(&self) -> usize {
        self.chain_count
    }

    fn walk(&self, prefix: &[TokenId]) -> Option<usize> {
        let mut node = 0usize;
        for token in prefix {
            node = *self.nodes[node].children.get(token)?;
        }
        Some(node)
    }

    /// Tokens that extend `prefix` to another valid prefix, sorted ascending.
    /// Includes the end-of-sequence token when `prefix` is a complete
    /// candidate. Errors if `prefix` itself is not in the tree.
    pub fn allowed_next(&self, prefix: &[TokenId]) -> Result<Vec<TokenId>, DecodeError> {
        let node = self.walk(prefix).ok_or(DecodeError::InvalidPrefix)?;
        let node = &self.nodes[node];
        let mut allowed: Vec<TokenId> = node.children.keys().copied().collect();
        if node.terminal.is_some() {
            allowed.push(self.eos_id);
            allowed.sort_unstable();
        }
        Ok(allowed)
    }

    /// Candidate index if `prefix` is a complete candidate.
    pub fn terminal_index(&self, prefix: &[TokenId]) -> Option<usize> {
        self.walk(prefix).and_then(|n| self.nodes[n].terminal)
    }

    /// Whether `prefix` is a valid (possibly partial) tree prefix.
    pub fn is_valid_prefix(&self, prefix: &[TokenId]) -> bool {
        self.walk(prefix).is_some()
    }
}
