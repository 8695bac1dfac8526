//! Evidence-guided document filtering.
//!
//! The retrieved ranking is split into a high-confidence head (the first
//! `top_n` documents, always kept) and a low-confidence tail. A tail document
//! survives only if some triple from the union of the decoded chains matches
//! it, either because the triple's flat text occurs as a substring of the
//! document text, or because the document is recorded as a source of the
//! triple (the provenance short-circuit, on by default: extraction may
//! rephrase the surface form, while provenance is exact). Everything else in
//! the tail is dropped. Rank order of kept documents is preserved.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::decode::EvidenceChain;
use crate::ingest::{normalize_entity, Corpus, RetrievalRun, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchNorm {
    /// Raw byte substring matching.
    #[serde(rename = "exact")]
    Exact,
    /// Casefold and collapse whitespace on both sides before matching.
    #[serde(rename = "casefold-whitespace")]
    CasefoldWhitespace,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    /// Documents at rank <= top_n are kept unconditionally.
    pub top_n: usize,
    pub match_normalization: MatchNorm,
    /// Treat a document listed in a triple's source_doc_ids as matching.
    pub use_provenance: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            top_n: 2,
            match_normalization: MatchNorm::CasefoldWhitespace,
            use_provenance: true,
        }
    }
}

/// Outcome of filtering one query's retrieved set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedContext {
    /// Kept documents in their original rank order.
    pub kept_doc_ids: Vec<String>,
    pub dropped_doc_ids: Vec<String>,
    /// For each document with at least one match, the matching triples.
    pub matched_triples: BTreeMap<String, Vec<Triple>>,
    pub chains_used: Vec<EvidenceChain>,
}

/// Deduplicated union of the chains' triples, in canonical forward
/// orientation, sorted by normalized key. Reverse-walked steps contribute
/// their forward triple.
pub fn triple_union(chains: &[EvidenceChain]) -> Vec<Triple> {
    let mut union: BTreeMap<(String, String, String), Triple> = BTreeMap::new();
    for chain in chains {
        for step in &chain.steps {
            union.entry(step.triple.normalized_key()).or_insert_with(|| step.triple.clone());
        }
    }
    union.into_values().collect()
}

/// Filter one retrieval run against the decoded evidence chains.
///
/// With no chains the result is exactly the top-`top_n` head. When `top_n`
/// meets or exceeds the retrieval depth every document is kept (degenerate,
/// logged).
pub fn refine(
    retrieved: &RetrievalRun,
    chains: &[EvidenceChain],
    corpus: &Corpus,
    config: &RefineConfig,
) -> RefinedContext {
    if config.top_n >= retrieved.ranked_doc_ids.len() && !retrieved.ranked_doc_ids.is_empty() {
        log::warn!(
            "top_n {} covers the whole ranking ({} docs) for {}; nothing to filter",
            config.top_n,
            retrieved.ranked_doc_ids.len(),
            retrieved.query_id
        );
    }
    let union = triple_union(chains);
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut matched_triples: BTreeMap<String, Vec<Triple>> = BTreeMap::new();

    for (rank0, doc_id) in retrieved.ranked_doc_ids.iter().enumerate() {
        let matches = matching_triples(doc_id, &union, corpus, config);
        if !matches.is_empty() {
            matched_triples.insert(doc_id.clone(), matches);
        }
        if rank0 < config.top_n || matched_triples.contains_key(doc_id) {
            kept.push(doc_id.clone());
        } else {
            dropped.push(doc_id.clone());
        }
    }

    RefinedContext { kept_doc_ids: kept, dropped_doc_ids: dropped, matched_triples, chains_used: chains.to_vec() }
}

/// Whether a triple matches a document under the configured normalization,
/// by substring or by provenance.
pub fn triple_matches_doc(
    triple: &Triple,
    doc_id: &str,
    corpus: &Corpus,
    config: &RefineConfig,
) -> bool {
    if config.use_provenance && triple.source_doc_ids.contains(doc_id) {
        return true;
    }
    let Some(doc) = corpus.document(doc_id) else {
        return false;
    };
    match config.match_normalization {
        MatchNorm::Exact => doc.text.contains(&triple.linearize()),
        MatchNorm::CasefoldWhitespace => {
            normalize_entity(&doc.text).contains(&normalize_entity(&triple.linearize()))
        }
    }
}

fn matching_triples(
    doc_id: &str,
    union: &[Triple],
    corpus: &Corpus,
    config: &RefineConfig,
) -> Vec<Triple> {
    union
        .iter()
        .filter(|t| triple_matches_doc(t, doc_id, corpus, config))
        .cloned()
        .collect()
}
