//! Test-only oracles and generators (feature `testkit`).
//!
//! Everything here is an independent reimplementation used to cross-check
//! the production code paths: the path enumerator does its own adjacency
//! walk and its own score composition, the decoding oracle scores candidates
//! token by token without touching the prefix tree, and the filtering oracle
//! re-derives the kept set by scanning every (triple, document) pair with
//! its own matching code. None of it is part of the crate's public API.

use std::collections::BTreeSet;

use crate::embed::{cosine, EmbeddingProvider, EmbeddingVector};
use crate::ingest::{Corpus, RetrievalRun, Triple};

/// SplitMix64: a tiny, permanently stable PRNG for generator code, so test
/// corpora never shift when a dependency bumps.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in `0..bound` (bound > 0).
    pub fn below(&mut self, bound: usize) -> usize {
        (self.next_u64() % bound as u64) as usize
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    pub fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.below(items.len())]
    }
}

pub mod pathsearch {
    use super::*;
    use crate::graph::SearchConfig;

    #[derive(Debug, Clone)]
    pub struct OraclePath {
        pub linearized: String,
        pub score: f64,
    }

    struct Arena<'a> {
        triples: &'a [Triple],
        sims: Vec<f64>,
    }

    /// Exhaustively enumerate all simple paths from `start_nodes` up to
    /// `max_hops`, post-filter to paths whose every step clears the edge
    /// threshold, score each with an independent composition of the three
    /// factors, and rank with the same (score desc, linearized asc) rule.
    pub fn enumerate_and_score(
        edge_triples: &[Triple],
        start_nodes: &BTreeSet<String>,
        query_embedding: &EmbeddingVector,
        config: &SearchConfig,
        provider: &EmbeddingProvider,
    ) -> Vec<OraclePath> {
        let mut sims = Vec::with_capacity(edge_triples.len());
        let mut embeddings = Vec::with_capacity(edge_triples.len());
        for triple in edge_triples {
            let embedding = provider.embed_one(&triple.linearize()).expect("embed");
            sims.push(cosine(&embedding, query_embedding).expect("cosine"));
            embeddings.push(embedding);
        }
        let arena = Arena { triples: edge_triples, sims };

        // Raw enumeration, no similarity pruning.
        let mut raw: Vec<Vec<(usize, bool)>> = Vec::new();
        for start in start_nodes {
            let mut visited: BTreeSet<String> = BTreeSet::new();
            visited.insert(start.clone());
            let mut steps = Vec::new();
            walk(&arena, start, 0, config, &mut visited, &mut steps, &mut raw);
        }

        // Post-filter on the edge threshold.
        raw.retain(|steps| steps.iter().all(|&(e, _)| arena.sims[e] >= config.edge_threshold));

        let mut scored: Vec<OraclePath> = raw
            .into_iter()
            .map(|steps| {
                let linearized = render(edge_triples, &steps);
                let score = score(&steps, &embeddings, &arena.sims, query_embedding, config);
                OraclePath { linearized, score }
            })
            .collect();
        scored.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.linearized.cmp(&b.linearized))
        });
        scored.truncate(config.max_candidates);
        scored
    }

    fn walk(
        arena: &Arena<'_>,
        node: &str,
        depth: usize,
        config: &SearchConfig,
        visited: &mut BTreeSet<String>,
        steps: &mut Vec<(usize, bool)>,
        out: &mut Vec<Vec<(usize, bool)>>,
    ) {
        if depth == config.max_hops {
            return;
        }
        for (index, triple) in arena.triples.iter().enumerate() {
            let directions: &[bool] =
                if config.allow_reverse_edges { &[false, true] } else { &[false] };
            for &reversed in directions {
                let (from, to) = if reversed {
                    (triple.object.as_str(), triple.subject.as_str())
                } else {
                    (triple.subject.as_str(), triple.object.as_str())
                };
                if from != node || visited.contains(to) {
                    continue;
                }
                visited.insert(to.to_string());
                steps.push((index, reversed));
                out.push(steps.clone());
                walk(arena, to, depth + 1, config, visited, steps, out);
                steps.pop();
                visited.remove(to);
            }
        }
    }

    fn render(triples: &[Triple], steps: &[(usize, bool)]) -> String {
        let mut out = String::new();
        for (i, &(index, reversed)) in steps.iter().enumerate() {
            let t = &triples[index];
            let (from, to) = if reversed {
                (t.object.as_str(), t.subject.as_str())
            } else {
                (t.subject.as_str(), t.object.as_str())
            };
            if i == 0 {
                out.push_str(from);
            }
            out.push_str(" - ");
            out.push_str(&t.relation);
            if reversed {
                out.push_str(" (inv)");
            }
            out.push_str(" -> ");
            out.push_str(to);
        }
        out
    }

    fn score(
        steps: &[(usize, bool)],
        embeddings: &[EmbeddingVector],
        sims: &[f64],
        query: &EmbeddingVector,
        config: &SearchConfig,
    ) -> f64 {
        let len = steps.len();
        let over = len.saturating_sub(config.expected_max_len);
        let penalty = if over == 0 { 1.0 } else { config.length_decay.powi(over as i32) };

        let dim = query.dim();
        let mut mean = vec![0.0f64; dim];
        for &(index, _) in steps {
            for (acc, v) in mean.iter_mut().zip(embeddings[index].values()) {
                *acc += *v as f64;
            }
        }
        for v in &mut mean {
            *v /= len as f64;
        }
        let mut dot = 0.0;
        let mut norm = 0.0;
        for (m, q) in mean.iter().zip(query.values()) {
            dot += m * *q as f64;
            norm += m * m;
        }
        let denom = norm.sqrt() * query.l2_norm();
        let relevance = if denom == 0.0 { 0.0 } else { (dot / denom).clamp(-1.0, 1.0) };

        let boosted = steps.iter().filter(|&&(i, _)| sims[i] >= config.boost_threshold).count();
        let reward = config.boost_factor.powi(boosted as i32);
        penalty * relevance * reward
    }

    /// Generator for small random graphs plus a matching search config.
    pub struct RandomSearchCase {
        pub triples: Vec<Triple>,
        pub retrieved: BTreeSet<String>,
        pub query_text: String,
        pub config: SearchConfig,
        pub start_count: usize,
    }

    pub fn random_case(rng: &mut SplitMix64) -> RandomSearchCase {
        let node_pool: Vec<String> = (0..(2 + rng.below(11))).map(|i| format!("node{i}")).collect();
        let relations = ["links", "cites", "near", "within", "before"];
        let docs: Vec<String> = (0..6).map(|i| format!("doc{i}")).collect();

        let edge_count = 1 + rng.below(30);
        let mut triples = Vec::new();
        for _ in 0..edge_count {
            let subject = rng.pick(&node_pool).clone();
            let object = rng.pick(&node_pool).clone();
            let relation = rng.pick(&relations).to_string();
            let mut source_doc_ids = BTreeSet::new();
            source_doc_ids.insert(rng.pick(&docs).clone());
            if rng.chance(0.3) {
                source_doc_ids.insert(rng.pick(&docs).clone());
            }
            triples.push(Triple { subject, relation, object, source_doc_ids });
        }

        let mut retrieved = BTreeSet::new();
        for doc in &docs {
            if rng.chance(0.7) {
                retrieved.insert(doc.clone());
            }
        }
        if retrieved.is_empty() {
            retrieved.insert(docs[0].clone());
        }

        // Query made of tokens drawn from the same pools so edge
        // similarities spread across any threshold.
        let mut query_tokens = Vec::new();
        for _ in 0..(2 + rng.below(4)) {
            if rng.chance(0.5) {
                query_tokens.push(rng.pick(&node_pool).clone());
            } else {
                query_tokens.push(rng.pick(&relations).to_string());
            }
        }
        let query_text = query_tokens.join(" ");

        let edge_threshold = -0.2 + 1.0 * rng.unit();
        let boost_threshold = edge_threshold + (1.0 - edge_threshold) * rng.unit();
        let config = SearchConfig {
            node_threshold: 0.9,
            edge_threshold,
            boost_threshold: boost_threshold.min(1.0),
            length_decay: 0.5 + 0.45 * rng.unit(),
            boost_factor: 1.01 + 0.5 * rng.unit(),
            expected_max_len: 1 + rng.below(4),
            max_hops: 1 + rng.below(4),
            max_candidates: *rng.pick(&[3usize, 10, 60]),
            allow_reverse_edges: rng.chance(0.7),
            fallback_to_best_node: true,
        };
        RandomSearchCase { triples, retrieved, query_text, config, start_count: 1 + rng.below(3) }
    }
}

pub mod decoding {
    use super::*;
    use crate::decode::{TokenScorer, Tokenizer};

    /// Score every candidate token by token (singleton allowed sets, so the
    /// prefix tree is never consulted) and rank by (logprob desc, text asc).
    pub fn exhaustive_ranking(
        candidates: &[String],
        tokenizer: &dyn Tokenizer,
        scorer: &dyn TokenScorer,
        context: &str,
    ) -> Vec<(f64, String)> {
        let mut ranked: Vec<(f64, String)> = candidates
            .iter()
            .map(|candidate| {
                let tokens = tokenizer.encode(candidate);
                let mut total = 0.0;
                for i in 0..tokens.len() {
                    let lps = scorer
                        .next_token_logprobs(context, &tokens[..i], &[tokens[i]])
                        .expect("scorer");
                    total += lps[&tokens[i]];
                }
                let eos = tokenizer.eos_id();
                let lps = scorer.next_token_logprobs(context, &tokens, &[eos]).expect("scorer");
                total += lps[&eos];
                (total, candidate.clone())
            })
            .collect();
        ranked.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.1.cmp(&b.1))
        });
        ranked
    }

    /// Random deduplicated candidate set over a small word alphabet.
    pub fn random_candidates(rng: &mut SplitMix64, max_chains: usize) -> Vec<String> {
        let words = ["ash", "birch", "cedar", "dune", "elm", "fern", "grove", "heath"];
        let target = 1 + rng.below(max_chains);
        let mut set = BTreeSet::new();
        let mut out = Vec::new();
        for _ in 0..target * 4 {
            if out.len() == target {
                break;
            }
            let len = 1 + rng.below(6);
            let chain: Vec<&str> = (0..len).map(|_| *rng.pick(&words)).collect();
            let text = chain.join(" ");
            if set.insert(text.clone()) {
                out.push(text);
            }
        }
        out
    }
}

pub mod filtering {
    use super::*;
    use crate::refine::{MatchNorm, RefineConfig};

    /// Re-derive the kept/dropped partition by scanning every (triple,
    /// document) pair with independent matching code.
    pub fn brute_force_partition(
        run: &RetrievalRun,
        union: &[Triple],
        corpus: &Corpus,
        config: &RefineConfig,
    ) -> (Vec<String>, Vec<String>) {
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        for (rank0, doc_id) in run.ranked_doc_ids.iter().enumerate() {
            let mut matched = false;
            for triple in union {
                if config.use_provenance && triple.source_doc_ids.contains(doc_id) {
                    matched = true;
                    break;
                }
                if let Some(doc) = corpus.document(doc_id) {
                    let (hay, needle) = match config.match_normalization {
                        MatchNorm::Exact => (
                            doc.text.clone(),
                            format!("{} {} {}", triple.subject, triple.relation, triple.object),
                        ),
                        MatchNorm::CasefoldWhitespace => (
                            squash(&doc.text),
                            squash(&format!(
                                "{} {} {}",
                                triple.subject, triple.relation, triple.object
                            )),
                        ),
                    };
                    if hay.contains(&needle) {
                        matched = true;
                        break;
                    }
                }
            }
            if rank0 < config.top_n || matched {
                kept.push(doc_id.clone());
            } else {
                dropped.push(doc_id.clone());
            }
        }
        (kept, dropped)
    }

    fn squash(s: &str) -> String {
        s.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
    }

    /// Fraction of `gold` present in `docs`; `None` for an empty gold set.
    pub fn set_recall(docs: &[String], gold: &BTreeSet<String>) -> Option<f64> {
        if gold.is_empty() {
            return None;
        }
        let hit = gold.iter().filter(|g| docs.contains(g)).count();
        Some(hit as f64 / gold.len() as f64)
    }
}
