//! Evidence-chain mining and retrieval-context refinement.
//!
//! This crate turns a retrieval run over a document corpus into a refined,
//! lower-noise context set for downstream question answering:
//!
//! 1. [`ingest`] loads documents, extracted triples, queries, and retrieval
//!    runs from line-delimited JSON files.
//! 2. [`embed`] provides vector embeddings behind one interface with a
//!    deterministic local backend and a remote HTTP backend.
//! 3. [`graph`] builds a query-local evidence graph from the retrieved
//!    documents' triples and searches it for scored candidate paths.
//! 4. [`decode`] organizes candidate chains into a token prefix tree and runs
//!    constrained beam search against a pluggable token scorer, so every
//!    emitted chain is guaranteed to be a member of the candidate set.
//! 5. [`refine`] uses the decoded chains to filter low-confidence documents
//!    out of the retrieved context.
//! 6. [`metrics`] scores answers and retrieval quality (EM, F1, Recall@n,
//!    recall conversion rate, average total / irrelevant documents).

pub mod decode;
pub mod embed;
pub mod graph;
pub mod ingest;
pub mod metrics;
pub mod refine;
#[cfg(feature = "testkit")]
pub mod testkit;

pub use decode::{DecodedChain, EvidenceChain, PrefixTree, TokenId, TokenScorer, Tokenizer};
pub use embed::{cosine, EmbeddingConfig, EmbeddingProvider, EmbeddingVector};
pub use graph::{CandidatePath, EvidenceGraph, OrientedTriple, SearchConfig};
pub use ingest::{Corpus, Document, QueryCase, RetrievalRun, Triple};
pub use metrics::{EvaluationRecord, MetricsReport};
pub use refine::{RefineConfig, RefinedContext};
