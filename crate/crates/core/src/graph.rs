//! Query-local evidence graph and activated path search.
//!
//! The graph is built from the triples of the currently retrieved documents
//! only. Search proceeds in three steps:
//!
//! 1. Start-node identification: nodes whose embedding is close enough to
//!    the aggregated query-entity embedding.
//! 2. Depth-first exploration from those nodes under a hop budget, pruning
//!    any step whose triple-to-query similarity falls below the edge
//!    threshold. Paths are simple (no node revisits); edges may be walked
//!    against their direction, marked `(inv)` in the rendered chain.
//! 3. Comprehensive scoring of each surviving path: a length penalty for
//!    paths beyond the expected maximum, overall semantic relevance (cosine
//!    between the mean triple embedding and the query), and an exponential
//!    reward for steps whose similarity clears the boost threshold.
//!
//! Results are ranked by score, ties broken by the rendered chain string so
//! output order is fully deterministic.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::embed::{cosine, EmbedError, EmbeddingProvider, EmbeddingVector};
use crate::ingest::Triple;

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    #[error("keyword entity list must be non-empty")]
    NoKeywords,
    #[error("cannot score an empty path")]
    EmptyPath,
}

/// Path-search thresholds and weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Minimum cosine between a node and the aggregated query entities for
    /// the node to seed the search.
    pub node_threshold: f64,
    /// Steps whose triple-to-query similarity falls below this are pruned.
    pub edge_threshold: f64,
    /// Steps at or above this similarity earn the activation reward. Must be
    /// at least `edge_threshold` so only surviving steps can be rewarded.
    pub boost_threshold: f64,
    /// Per-hop decay applied to the portion of a path beyond
    /// `expected_max_len`; in (0, 1).
    pub length_decay: f64,
    /// Per-boosted-step reward factor; greater than 1.
    pub boost_factor: f64,
    /// Path length at which the length penalty starts to bite.
    pub expected_max_len: usize,
    /// Hop budget for the depth-first exploration.
    pub max_hops: usize,
    /// Ranked candidate list is truncated to this many paths.
    pub max_candidates: usize,
    /// Walk edges against their direction as well (relation marked "(inv)").
    pub allow_reverse_edges: bool,
    /// When no node clears `node_threshold`, seed with the single most
    /// similar node instead of returning nothing.
    pub fallback_to_best_node: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            node_threshold: 0.90,
            edge_threshold: 0.45,
            boost_threshold: 0.45,
            length_decay: 0.90,
            boost_factor: 1.10,
            expected_max_len: 10,
            max_hops: 10,
            max_candidates: 60,
            allow_reverse_edges: true,
            fallback_to_best_node: true,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), GraphError> {
        let err = |msg: String| Err(GraphError::InvalidConfig(msg));
        if !(0.0..=1.0).contains(&self.node_threshold) {
            return err(format!("node_threshold {} outside [0, 1]", self.node_threshold));
        }
        if !(-1.0..=1.0).contains(&self.edge_threshold) {
            return err(format!("edge_threshold {} outside [-1, 1]", self.edge_threshold));
        }
        if !(-1.0..=1.0).contains(&self.boost_threshold) {
            return err(format!("boost_threshold {} outside [-1, 1]", self.boost_threshold));
        }
        if self.boost_threshold < self.edge_threshold {
            return err(format!(
                "boost_threshold {} must be >= edge_threshold {}",
                self.boost_threshold, self.edge_threshold
            ));
        }
        if !(self.length_decay > 0.0 && self.length_decay < 1.0) {
            return err(format!("length_decay {} outside (0, 1)", self.length_decay));
        }
        if self.boost_factor <= 1.0 {
            return err(format!("boost_factor {} must be > 1", self.boost_factor));
        }
        for (name, value) in [
            ("expected_max_len", self.expected_max_len),
            ("max_hops", self.max_hops),
            ("max_candidates", self.max_candidates),
        ] {
            if value == 0 {
                return err(format!("{name} must be positive"));
            }
        }
        Ok(())
    }
}

/// A triple as traversed: `reversed` means the walk went object-to-subject.
/// The embedded/matched form is always the forward `triple`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrientedTriple {
    pub triple: Triple,
    pub reversed: bool,
}

impl OrientedTriple {
    pub fn from_node(&self) -> &str {
        if self.reversed { &self.triple.object } else { &self.triple.subject }
    }

    pub fn to_node(&self) -> &str {
        if self.reversed { &self.triple.subject } else { &self.triple.object }
    }

    fn display_relation(&self) -> String {
        if self.reversed {
            format!("{} (inv)", self.triple.relation)
        } else {
            self.triple.relation.clone()
        }
    }
}

/// A scored candidate evidence path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePath {
    pub steps: Vec<OrientedTriple>,
    /// Per-step cosine between the forward triple and the query.
    pub triple_similarities: Vec<f64>,
    pub score: f64,
}

impl CandidatePath {
    /// Render the path as `"A - rel -> B - rel2 (inv) -> C"`.
    pub fn linearized(&self) -> String {
        let mut out = String::new();
        if let Some(first) = self.steps.first() {
            out.push_str(first.from_node());
        }
        for step in &self.steps {
            out.push_str(" - ");
            out.push_str(&step.display_relation());
            out.push_str(" -> ");
            out.push_str(step.to_node());
        }
        out
    }

    pub fn forward_triples(&self) -> impl Iterator<Item = &Triple> {
        self.steps.iter().map(|s| &s.triple)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct GraphEdge {
    subject: usize,
    relation: String,
    object: usize,
    source_doc_ids: BTreeSet<String>,
}

/// Directed multigraph over entity strings, with relation-labeled edges
/// annotated by source documents. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceGraph {
    nodes: Vec<String>,
    node_ids: BTreeMap<String, usize>,
    edges: Vec<GraphEdge>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
}

impl EvidenceGraph {
    /// Build the graph from the triples whose provenance intersects the
    /// retrieved document set. Identical (subject, relation, object) facts
    /// coming from different documents merge into a single edge with the
    /// union of their (retrieved) sources, so construction is independent of
    /// input order.
    pub fn build(triples: &[Triple], retrieved_doc_ids: &BTreeSet<String>) -> Self {
        let mut merged: BTreeMap<(String, String, String), BTreeSet<String>> = BTreeMap::new();
        for triple in triples {
            let sources: BTreeSet<String> = triple
                .source_doc_ids
                .intersection(retrieved_doc_ids)
                .cloned()
                .collect();
            if sources.is_empty() {
                continue;
            }
            merged
                .entry((triple.subject.clone(), triple.relation.clone(), triple.object.clone()))
                .or_default()
                .extend(sources);
        }

        let mut node_set = BTreeSet::new();
        for (subject, _, object) in merged.keys() {
            node_set.insert(subject.clone());
            node_set.insert(object.clone());
        }
        let nodes: Vec<String> = node_set.into_iter().collect();
        let node_ids: BTreeMap<String, usize> =
            nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();

        let mut edges = Vec::with_capacity(merged.len());
        let mut outgoing = vec![Vec::new(); nodes.len()];
        let mut incoming = vec![Vec::new(); nodes.len()];
        for ((subject, relation, object), source_doc_ids) in merged {
            let edge_id = edges.len();
            let s = node_ids[&subject];
            let o = node_ids[&object];
            edges.push(GraphEdge { subject: s, relation, object: o, source_doc_ids });
            outgoing[s].push(edge_id);
            incoming[o].push(edge_id);
        }

        EvidenceGraph { nodes, node_ids, edges, outgoing, incoming }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_name(&self, index: usize) -> &str {
        &self.nodes[index]
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.node_ids.get(name).copied()
    }

    pub fn edge_triple(&self, edge_id: usize) -> Triple {
        let edge = &self.edges[edge_id];
        Triple {
            subject: self.nodes[edge.subject].clone(),
            relation: edge.relation.clone(),
            object: self.nodes[edge.object].clone(),
            source_doc_ids: edge.source_doc_ids.clone(),
        }
    }

    pub fn edge_triples(&self) -> Vec<Triple> {
        (0..self.edges.len()).map(|i| self.edge_triple(i)).collect()
    }

    /// Start nodes: every node whose similarity to the aggregated keyword
    /// embedding reaches `node_threshold`. When none does and `fallback` is
    /// set, the single most similar node is used (smallest name on ties).
    pub fn identify_initial_nodes(
        &self,
        keyword_entities: &[String],
        provider: &EmbeddingProvider,
        node_threshold: f64,
        fallback: bool,
    ) -> Result<BTreeSet<usize>, GraphError> {
        if keyword_entities.is_empty() {
            return Err(GraphError::NoKeywords);
        }
        if self.nodes.is_empty() {
            return Ok(BTreeSet::new());
        }
        let keyword_refs: Vec<&str> = keyword_entities.iter().map(|s| s.as_str()).collect();
        let aggregate = provider.aggregate_entity_embedding(&keyword_refs)?;
        let node_refs: Vec<&str> = self.nodes.iter().map(|s| s.as_str()).collect();
        let node_embeddings = provider.embed(&node_refs)?;

        let mut selected = BTreeSet::new();
        let mut best: Option<(usize, f64)> = None;
        for (index, embedding) in node_embeddings.iter().enumerate() {
            let sim = cosine(embedding, &aggregate)?;
            if sim >= node_threshold {
                selected.insert(index);
            }
            // Strict > keeps the first (lexicographically smallest) node on ties.
            if best.map(|(_, s)| sim > s).unwrap_or(true) {
                best = Some((index, sim));
            }
        }
        if selected.is_empty() && fallback {
            if let Some((index, _)) = best {
                selected.insert(index);
            }
        }
        Ok(selected)
    }

    /// Enumerate every simple path from `v_init` whose steps all clear the
    /// edge threshold, score each, and return the ranked, truncated list.
    pub fn explore_paths(
        &self,
        v_init: &BTreeSet<usize>,
        query_embedding: &EmbeddingVector,
        config: &SearchConfig,
        provider: &EmbeddingProvider,
    ) -> Result<Vec<CandidatePath>, GraphError> {
        config.validate()?;
        if v_init.is_empty() || self.edges.is_empty() {
            return Ok(Vec::new());
        }

        let edge_texts: Vec<String> =
            (0..self.edges.len()).map(|i| self.edge_triple(i).linearize()).collect();
        let edge_refs: Vec<&str> = edge_texts.iter().map(|s| s.as_str()).collect();
        let edge_embeddings = provider.embed(&edge_refs)?;
        let mut edge_sims = Vec::with_capacity(self.edges.len());
        for embedding in &edge_embeddings {
            edge_sims.push(cosine(embedding, query_embedding)?);
        }

        let mut raw_paths: Vec<Vec<(usize, bool)>> = Vec::new();
        for &start in v_init {
            let mut visited = vec![false; self.nodes.len()];
            visited[start] = true;
            let mut steps = Vec::new();
            self.dfs(start, 0, &edge_sims, config, &mut visited, &mut steps, &mut raw_paths);
        }

        let mut scored = Vec::with_capacity(raw_paths.len());
        for raw in raw_paths {
            let steps: Vec<OrientedTriple> = raw
                .into_iter()
                .map(|(edge_id, reversed)| OrientedTriple {
                    triple: self.edge_triple(edge_id),
                    reversed,
                })
                .collect();
            let path = score_path(&steps, query_embedding, config, provider)?;
            let key = path.linearized();
            scored.push((path, key));
        }

        scored.sort_by(|(a, ka), (b, kb)| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(Ordering::Equal)
                .then_with(|| ka.cmp(kb))
        });
        scored.truncate(config.max_candidates);
        Ok(scored.into_iter().map(|(path, _)| path).collect())
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        &self,
        node: usize,
        depth: usize,
        edge_sims: &[f64],
        config: &SearchConfig,
        visited: &mut Vec<bool>,
        steps: &mut Vec<(usize, bool)>,
        out: &mut Vec<Vec<(usize, bool)>>,
    ) {
        if depth == config.max_hops {
            return;
        }
        let forward = self.outgoing[node].iter().map(|&e| (e, false));
        let backward = self.incoming[node].iter().map(|&e| (e, true));
        let neighbors: Vec<(usize, bool)> = if config.allow_reverse_edges {
            forward.chain(backward).collect()
        } else {
            forward.collect()
        };
        for (edge_id, reversed) in neighbors {
            if edge_sims[edge_id] < config.edge_threshold {
                continue;
            }
            let edge = &self.edges[edge_id];
            let target = if reversed { edge.subject } else { edge.object };
            if visited[target] {
                continue;
            }
            visited[target] = true;
            steps.push((edge_id, reversed));
            out.push(steps.clone());
            self.dfs(target, depth + 1, edge_sims, config, visited, steps, out);
            steps.pop();
            visited[target] = false;
        }
    }
}

/// Cosine between a triple's flat text and the query.
pub fn score_triple(
    triple: &Triple,
    query_embedding: &EmbeddingVector,
    provider: &EmbeddingProvider,
) -> Result<f64, GraphError> {
    let embedding = provider.embed_one(&triple.linearize())?;
    Ok(cosine(&embedding, query_embedding)?)
}

/// Score an oriented-triple sequence and assemble the [`CandidatePath`].
///
/// The score is the product of three factors:
/// - length penalty: `length_decay ^ max(0, len - expected_max_len)`,
///   exactly 1 for paths within the expected length;
/// - overall relevance: cosine between the arithmetic mean of the step
///   embeddings and the query embedding (the mean is used as-is; cosine is
///   scale-invariant in that argument);
/// - activation reward: `boost_factor ^ (number of steps with similarity >=
///   boost_threshold)`.
pub fn score_path(
    steps: &[OrientedTriple],
    query_embedding: &EmbeddingVector,
    config: &SearchConfig,
    provider: &EmbeddingProvider,
) -> Result<CandidatePath, GraphError> {
    if steps.is_empty() {
        return Err(GraphError::EmptyPath);
    }
    let texts: Vec<String> = steps.iter().map(|s| s.triple.linearize()).collect();
    let text_refs: Vec<&str> = texts.iter().map(|s| s.as_str()).collect();
    let embeddings = provider.embed(&text_refs)?;

    let mut similarities = Vec::with_capacity(steps.len());
    for embedding in &embeddings {
        similarities.push(cosine(embedding, query_embedding)?);
    }

    let len = steps.len();
    let over = len.saturating_sub(config.expected_max_len);
    let penalty = if over == 0 { 1.0 } else { config.length_decay.powi(over as i32) };

    let dim = embeddings[0].dim();
    let mut mean = vec![0.0f64; dim];
    for embedding in &embeddings {
        for (acc, v) in mean.iter_mut().zip(embedding.values()) {
            *acc += *v as f64;
        }
    }
    for v in &mut mean {
        *v /= len as f64;
    }
    let relevance = cosine_mean_query(&mean, query_embedding);

    let boosted = similarities.iter().filter(|s| **s >= config.boost_threshold).count();
    let reward = config.boost_factor.powi(boosted as i32);

    Ok(CandidatePath {
        steps: steps.to_vec(),
        triple_similarities: similarities,
        score: penalty * relevance * reward,
    })
}

/// Cosine between an f64 mean vector and a query embedding; 0.0 when either
/// side has zero norm.
fn cosine_mean_query(mean: &[f64], query: &EmbeddingVector) -> f64 {
    let mut dot = 0.0;
    let mut norm_mean = 0.0;
    for (m, q) in mean.iter().zip(query.values()) {
        dot += m * *q as f64;
        norm_mean += m * m;
    }
    let denom = norm_mean.sqrt() * query.l2_norm();
    if denom == 0.0 {
        return 0.0;
    }
    (dot / denom).clamp(-1.0, 1.0)
}
