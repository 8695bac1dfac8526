//! Beam search constrained by the prefix tree.
//!
//! At every step the allowed-token set comes from the tree, the scorer is
//! queried only over that set, and only tokens the scorer actually returned
//! extend a beam. A chain is emitted when a terminal node is reached and the
//! end-of-sequence token is chosen; its total log-probability is the sum over
//! emitted tokens including that final end-of-sequence step. Ordering is by
//! total log-probability, ties broken by the decoded text, so decoding is
//! fully deterministic for a deterministic scorer.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::scorer::TokenScorer;
use super::tokenizer::{TokenId, Tokenizer};
use super::trie::PrefixTree;
use super::DecodeError;

/// A completed decode: always a full member of the candidate set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedChain {
    pub chain_index: usize,
    pub text: String,
    pub total_logprob: f64,
    pub tokens: Vec<TokenId>,
}

#[derive(Debug, Clone)]
struct Beam {
    tokens: Vec<TokenId>,
    text: String,
    logprob: f64,
}

/// Run constrained beam search, returning at most
/// `min(beam_width, max_chains)` completed chains, best first.
pub fn constrained_beam_search(
    tree: &PrefixTree,
    tokenizer: &dyn Tokenizer,
    scorer: &dyn TokenScorer,
    context: &str,
    beam_width: usize,
    max_chains: usize,
) -> Result<Vec<DecodedChain>, DecodeError> {
    if beam_width == 0 {
        return Err(DecodeError::InvalidBeamWidth);
    }
    let eos = tree.eos_id();
    let mut active = vec![Beam { tokens: Vec::new(), text: String::new(), logprob: 0.0 }];
    let mut finished: Vec<DecodedChain> = Vec::new();

    while !active.is_empty() {
        let mut extensions: Vec<Beam> = Vec::new();
        for beam in &active {
            let allowed = tree.allowed_next(&beam.tokens)?;
            if allowed.is_empty() {
                // Every tree node has children or a terminal, so this state
                // is unreachable unless the tree is corrupted.
                return Err(DecodeError::DeadEnd);
            }
            let logprobs = scorer.next_token_logprobs(context, &beam.tokens, &allowed)?;
            for (&token, &logprob) in &logprobs {
                if allowed.binary_search(&token).is_err() {
                    return Err(DecodeError::ScorerViolation(format!(
                        "scorer returned token {token} outside the allowed set"
                    )));
                }
                if !logprob.is_finite() {
                    return Err(DecodeError::ScorerViolation(format!(
                        "scorer returned non-finite logprob for token {token}"
                    )));
                }
                if token == eos {
                    let chain_index = tree
                        .terminal_index(&beam.tokens)
                        .ok_or(DecodeError::DeadEnd)?;
                    finished.push(DecodedChain {
                        chain_index,
                        text: tokenizer.decode(&beam.tokens),
                        total_logprob: beam.logprob + logprob,
                        tokens: beam.tokens.clone(),
                    });
                } else {
                    let mut tokens = beam.tokens.clone();
                    tokens.push(token);
                    let text = tokenizer.decode(&tokens);
                    extensions.push(Beam { tokens, text, logprob: beam.logprob + logprob });
                }
            }
        }
        extensions.sort_by(|a, b| rank(b.logprob, &b.text, a.logprob, &a.text));
        extensions.truncate(beam_width);
        active = extensions;
    }

    finished.sort_by(|a, b| rank(b.total_logprob, &b.text, a.total_logprob, &a.text));
    finished.truncate(beam_width.min(max_chains));
    Ok(finished)
}

/// Descending logprob, ascending text. Callers pass arguments pre-swapped so
/// this reads as a normal `sort_by` comparator.
fn rank(lp_b: f64, text_b: &str, lp_a: f64, text_a: &str) -> Ordering {
    lp_b.partial_cmp(&lp_a).unwrap_or(Ordering::Equal).then_with(|| text_a.cmp(text_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decode::scorer::{MockTableScorer, SeededScorer};
    use crate::decode::tokenizer::WhitespaceTokenizer;

    fn strings(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn single_candidate_is_forced() {
        let tok = WhitespaceTokenizer::new();
        let cands = strings(&["only chain here"]);
        let tree = PrefixTree::build(&cands, &tok).unwrap();
        let scorer = SeededScorer::new(7);
        let out = constrained_beam_search(&tree, &tok, &scorer, "", 1, 1).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].text, "only chain here");
        assert_eq!(out[0].chain_index, 0);
    }

    #[test]
    fn uniform_scorer_returns_lexicographically_smallest() {
        let tok = WhitespaceTokenizer::new();
        let cands = strings(&["c z", "a y", "b x"]);
        let tree = PrefixTree::build(&cands, &tok).unwrap();
        let scorer = MockTableScorer::uniform();
        let out = constrained_beam_search(&tree, &tok, &scorer, "", 2, 2).unwrap();
        let texts: Vec<&str> = out.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(texts, vec!["a y", "b x"]);
    }

    #[test]
    fn emitted_chains_are_candidate_members() {
        let tok = WhitespaceTokenizer::new();
        let cands = strings(&["a b c", "a b", "d e"]);
        let tree = PrefixTree::build(&cands, &tok).unwrap();
        let scorer = SeededScorer::new(99);
        let out = constrained_beam_search(&tree, &tok, &scorer, "", 3, 3).unwrap();
        assert!(!out.is_empty());
        for chain in &out {
            assert!(cands.contains(&chain.text));
            assert_eq!(cands[chain.chain_index], chain.text);
        }
    }

    #[test]
    fn wide_beam_matches_exhaustive_scoring() {
        let tok = WhitespaceTokenizer::new();
        let cands = strings(&["a b", "a c", "d b", "d c d", "e"]);
        let tree = PrefixTree::build(&cands, &tok).unwrap();
        let scorer = SeededScorer::new(5);
        let out = constrained_beam_search(&tree, &tok, &scorer, "ctx", 16, 16).unwrap();
        assert_eq!(out.len(), cands.len());

        // Exhaustive: score each candidate token-by-token with singleton
        // allowed sets, then apply the same ordering rule.
        let mut expected: Vec<(f64, String)> = cands
            .iter()
            .map(|c| {
                let tokens = tok.encode(c);
                let mut total = 0.0;
                for i in 0..tokens.len() {
                    total += scorer.next_token_logprobs("ctx", &tokens[..i], &[tokens[i]]).unwrap()
                        [&tokens[i]];
                }
                total += scorer.next_token_logprobs("ctx", &tokens, &[tok.eos_id()]).unwrap()
                    [&tok.eos_id()];
                (total, c.clone())
            })
            .collect();
        expected.sort_by(|a, b| {
            b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(&b.1))
        });

        for (chain, (lp, text)) in out.iter().zip(&expected) {
            assert_eq!(&chain.text, text);
            assert!((chain.total_logprob - lp).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_beam_width_is_rejected() {
        let tok = WhitespaceTokenizer::new();
        let tree = PrefixTree::build(&strings(&["a"]), &tok).unwrap();
        let scorer = MockTableScorer::uniform();
        assert!(matches!(
            constrained_beam_search(&tree, &tok, &scorer, "", 0, 1),
            Err(DecodeError::InvalidBeamWidth)
        ));
    }

    #[test]
    fn scorer_contract_violations_are_rejected() {
        struct OutsideAllowed;
        impl TokenScorer for OutsideAllowed {
            fn next_token_logprobs(
                &self,
                _context: &str,
                _prefix: &[TokenId],
                allowed: &[TokenId],
            ) -> Result<std::collections::BTreeMap<TokenId, f64>, DecodeError> {
                let rogue = allowed.iter().max().unwrap() + 1000;
                Ok([(rogue, -1.0)].into_iter().collect())
            }
        }
        struct NonFinite;
        impl TokenScorer for NonFinite {
            fn next_token_logprobs(
                &self,
                _context: &str,
                _prefix: &[TokenId],
                allowed: &[TokenId],
            ) -> Result<std::collections::BTreeMap<TokenId, f64>, DecodeError> {
                Ok(allowed.iter().map(|&t| (t, f64::NAN)).collect())
            }
        }
        let tok = WhitespaceTokenizer::new();
        let tree = PrefixTree::build(&strings(&["a b"]), &tok).unwrap();
        assert!(matches!(
            constrained_beam_search(&tree, &tok, &OutsideAllowed, "", 2, 2),
            Err(DecodeError::ScorerViolation(_))
        ));
        assert!(matches!(
            constrained_beam_search(&tree, &tok, &NonFinite, "", 2, 2),
            Err(DecodeError::ScorerViolation(_))
        ));
    }
}
