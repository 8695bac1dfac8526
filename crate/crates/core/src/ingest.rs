//! Loading and validation of external data files.
//!
//! All inputs are line-delimited JSON, one record per line. Loading is
//! strict: malformed lines, dangling document references, and duplicate
//! identifiers are errors rather than silently dropped records. The loaded
//! [`Corpus`] is immutable and safe to share across threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// A passage in the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub text: String,
}

/// A (subject, relation, object) fact extracted from one or more documents.
///
/// `source_doc_ids` records provenance: the documents the fact was extracted
/// from. Triples without provenance are rejected at load time because the
/// document-filtering stage relies on it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub relation: String,
    pub object: String,
    pub source_doc_ids: BTreeSet<String>,
}

impl Triple {
    /// The flat `"subject relation object"` form used for embedding and for
    /// substring matching against document text.
    pub fn linearize(&self) -> String {
        format!("{} {} {}", self.subject, self.relation, self.object)
    }

    /// Case- and whitespace-insensitive identity key.
    pub fn normalized_key(&self) -> (String, String, String) {
        (
            normalize_entity(&self.subject),
            normalize_entity(&self.relation),
            normalize_entity(&self.object),
        )
    }
}

/// Lowercase and collapse runs of whitespace.
pub fn normalize_entity(s: &str) -> String {
    s.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// A question with its gold labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryCase {
    pub query_id: String,
    pub question: String,
    pub gold_answers: Vec<String>,
    #[serde(default)]
    pub gold_support_doc_ids: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keyword_entities: Option<Vec<String>>,
}

/// One query's ranked retrieval output (rank 1 first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalRun {
    pub query_id: String,
    pub ranked_doc_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
}

impl RetrievalRun {
    /// The first `n` ranked documents.
    pub fn top_n(&self, n: usize) -> &[String] {
        &self.ranked_doc_ids[..self.ranked_doc_ids.len().min(n)]
    }
}

/// Loaded documents plus extracted triples, with referential integrity
/// verified: every triple's source documents are present.
#[derive(Debug, Clone)]
pub struct Corpus {
    documents: BTreeMap<String, Document>,
    triples: Vec<Triple>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>, triples: Vec<Triple>) -> Result<Self, IngestError> {
        let mut map = BTreeMap::new();
        for doc in documents {
            let doc_id = doc.doc_id.clone();
            if map.insert(doc_id.clone(), doc).is_some() {
                return Err(IngestError::DuplicateDocId { doc_id });
            }
        }
        for triple in &triples {
            for doc_id in &triple.source_doc_ids {
                if !map.contains_key(doc_id) {
                    return Err(IngestError::UnresolvedSourceDoc {
                        triple: triple.linearize(),
                        doc_id: doc_id.clone(),
                    });
                }
            }
        }
        Ok(Corpus { documents: map, triples })
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.documents.get(doc_id)
    }

    pub fn contains_doc(&self, doc_id: &str) -> bool {
        self.documents.contains_key(doc_id)
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.documents.values()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn document_count(&self) -> usize {
        self.documents.len()
    }

    pub fn triple_count(&self) -> usize {
        self.triples.len()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
    #[error("triple [{triple}] has unresolved source_doc_id {doc_id}")]
    UnresolvedSourceDoc { triple: String, doc_id: String },
    #[error("duplicate doc_id {doc_id}")]
    DuplicateDocId { doc_id: String },
    #[error("duplicate query_id {query_id}")]
    DuplicateQueryId { query_id: String },
    #[error("retrieval run for {query_id} ranks doc {doc_id} more than once")]
    DuplicateRankedDoc { query_id: String, doc_id: String },
    #[error("retrieval run for {query_id} references unknown doc {doc_id}")]
    UnresolvedRankedDoc { query_id: String, doc_id: String },
}

/// Parse a line-delimited JSON file, reporting the 1-based line number of
/// the first malformed record. Blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|err| IngestError::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message: err.to_string(),
        })?;
        records.push((line_no, record));
    }
    Ok(records)
}

/// Write records as line-delimited JSON, one per line.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), IngestError> {
    let file = File::create(path).map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    let mut writer = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).map_err(|err| IngestError::Malformed {
            path: path.to_path_buf(),
            line: 0,
            message: err.to_string(),
        })?;
        writer
            .write_all(line.as_bytes())
            .and_then(|_| writer.write_all(b"\n"))
            .map_err(|source| IngestError::Io { path: path.to_path_buf(), source })?;
    }
    writer.flush().map_err(|source| IngestError::Io { path: path.to_path_buf(), source })
}

/// Load documents and triples, validating uniqueness, non-empty fields, and
/// triple-to-document referential integrity.
pub fn load_corpus(documents_path: &Path, triples_path: &Path) -> Result<Corpus, IngestError> {
    let mut documents: BTreeMap<String, Document> = BTreeMap::new();
    for (line, doc) in read_jsonl::<Document>(documents_path)? {
        if doc.doc_id.is_empty() {
            return Err(malformed(documents_path, line, "empty doc_id"));
        }
        if doc.text.trim().is_empty() {
            return Err(malformed(documents_path, line, "document text must be non-empty"));
        }
        if documents.contains_key(&doc.doc_id) {
            return Err(IngestError::DuplicateDocId { doc_id: doc.doc_id });
        }
        documents.insert(doc.doc_id.clone(), doc);
    }

    let mut triples = Vec::new();
    for (line, triple) in read_jsonl::<Triple>(triples_path)? {
        for (field, value) in [
            ("subject", &triple.subject),
            ("relation", &triple.relation),
            ("object", &triple.object),
        ] {
            if value.trim().is_empty() {
                return Err(malformed(triples_path, line, &format!("empty {field}")));
            }
        }
        if triple.source_doc_ids.is_empty() {
            return Err(malformed(triples_path, line, "triple has no source_doc_ids"));
        }
        for doc_id in &triple.source_doc_ids {
            if !documents.contains_key(doc_id) {
                return Err(IngestError::UnresolvedSourceDoc {
                    triple: triple.linearize(),
                    doc_id: doc_id.clone(),
                });
            }
        }
        triples.push(triple);
    }

    if triples.is_empty() {
        log::warn!("{}: no triples loaded; downstream search will yield no chains", triples_path.display());
    }
    log::info!(
        "loaded corpus: {} documents, {} triples",
        documents.len(),
        triples.len()
    );
    Ok(Corpus { documents, triples })
}

/// Load query cases, enforcing unique query ids and non-empty gold answers.
pub fn load_queries(queries_path: &Path) -> Result<Vec<QueryCase>, IngestError> {
    let mut seen = BTreeSet::new();
    let mut queries = Vec::new();
    for (line, query) in read_jsonl::<QueryCase>(queries_path)? {
        if query.query_id.is_empty() {
            return Err(malformed(queries_path, line, "empty query_id"));
        }
        if query.gold_answers.is_empty() {
            return Err(malformed(queries_path, line, "gold_answers must be non-empty"));
        }
        if !seen.insert(query.query_id.clone()) {
            return Err(IngestError::DuplicateQueryId { query_id: query.query_id });
        }
        queries.push(query);
    }
    log::info!("loaded {} queries", queries.len());
    Ok(queries)
}

/// Load a retrieval run file into a per-query map. Every ranked document must
/// exist in the corpus and appear at most once per query.
pub fn load_retrieval_run(
    run_path: &Path,
    corpus: &Corpus,
) -> Result<BTreeMap<String, RetrievalRun>, IngestError> {
    let mut runs = BTreeMap::new();
    for (line, run) in read_jsonl::<RetrievalRun>(run_path)? {
        if run.query_id.is_empty() {
            return Err(malformed(run_path, line, "empty query_id"));
        }
        if let Some(scores) = &run.scores {
            if scores.len() != run.ranked_doc_ids.len() {
                return Err(malformed(
                    run_path,
                    line,
                    "scores length does not match ranked_doc_ids length",
                ));
            }
        }
        let mut seen_docs = BTreeSet::new();
        for doc_id in &run.ranked_doc_ids {
            if !corpus.contains_doc(doc_id) {
                return Err(IngestError::UnresolvedRankedDoc {
                    query_id: run.query_id.clone(),
                    doc_id: doc_id.clone(),
                });
            }
            if !seen_docs.insert(doc_id) {
                return Err(IngestError::DuplicateRankedDoc {
                    query_id: run.query_id.clone(),
                    doc_id: doc_id.clone(),
                });
            }
        }
        if run.ranked_doc_ids.is_empty() {
            log::warn!("retrieval run for {} is empty", run.query_id);
        }
        if runs.contains_key(&run.query_id) {
            return Err(IngestError::DuplicateQueryId { query_id: run.query_id });
        }
        runs.insert(run.query_id.clone(), run);
    }
    Ok(runs)
}

fn malformed(path: &Path, line: usize, message: &str) -> IngestError {
    IngestError::Malformed { path: path.to_path_buf(), line, message: message.to_string() }
}
