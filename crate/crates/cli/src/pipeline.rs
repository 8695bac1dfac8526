//! Stage orchestration.
//!
//! Every stage reads its inputs from files (the raw inputs plus the previous
//! stage's dump) and writes its own dump, so a full `run` and a stage-by-stage
//! rerun produce identical bytes. Per-query work is fail-soft: a query that
//! errors is recorded in the stage's failure file and the run continues.
//!
//! Artifacts, all under the output directory:
//!   ingest_summary.json   counts and input warnings
//!   keywords.jsonl        {query_id, entities, source}
//!   candidates.jsonl      {query_id, rank, score, triples, linearized}
//!   chains.jsonl          {query_id, rank, total_logprob, chain_text}
//!   refined.jsonl         {query_id, kept_doc_ids, dropped_doc_ids, matched_triple_counts}
//!   answers.jsonl         {query_id, answer}
//!   `failures_<stage>.jsonl` {query_id, stage, error}
//!   report.json / report.txt / report.csv / per_query.csv

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use chainsift_core::decode::{
    constrained_beam_search, ByteTokenizer, EvidenceChain, MockTableScorer, PrefixTree,
    RemoteCompletionScorer, SeededScorer, TokenScorer, Tokenizer, WhitespaceTokenizer,
};
use chainsift_core::embed::EmbeddingProvider;
use chainsift_core::graph::{EvidenceGraph, OrientedTriple};
use chainsift_core::ingest::{
    load_corpus, load_queries, load_retrieval_run, read_jsonl, write_jsonl, Corpus, QueryCase,
    RetrievalRun, Triple,
};
use chainsift_core::metrics::{EvaluationRecord, MetricsReport};
use chainsift_core::refine::refine;

use crate::config::{PipelineConfig, QaBackendKind, ScorerKind, Stage, TokenizerKind};
use crate::prompt::{
    assemble_qa_prompt, heuristic_keyword_entities, scorer_context, ENTITY_EXTRACTION_INSTRUCTION,
};
use crate::qa::{mock_answer, RemoteQaClient};

#[derive(Debug, Serialize, Deserialize)]
struct IngestSummary {
    documents: usize,
    triples: usize,
    queries: usize,
    retrieval_runs: usize,
    queries_without_run: Vec<String>,
    empty_rankings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct KeywordRow {
    query_id: String,
    entities: Vec<String>,
    source: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CandidateRow {
    query_id: String,
    rank: usize,
    score: f64,
    triples: Vec<[String; 3]>,
    linearized: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ChainRow {
    query_id: String,
    rank: usize,
    total_logprob: f64,
    chain_text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RefinedRow {
    query_id: String,
    kept_doc_ids: Vec<String>,
    dropped_doc_ids: Vec<String>,
    matched_triple_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AnswerRow {
    query_id: String,
    answer: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FailureRow {
    query_id: String,
    stage: String,
    error: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct FullReport {
    label: String,
    config_echo: Vec<String>,
    n_queries: usize,
    n_succeeded: usize,
    n_failed: usize,
    failures: Vec<FailureRow>,
    metrics: MetricsReport,
}

/// What `run` tells the caller for exit-code purposes.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub n_queries: usize,
    pub n_failed: usize,
    pub max_failure_rate: f64,
}

impl RunOutcome {
    pub fn failure_rate(&self) -> f64 {
        if self.n_queries == 0 {
            0.0
        } else {
            self.n_failed as f64 / self.n_queries as f64
        }
    }

    pub fn within_bound(&self) -> bool {
        self.failure_rate() <= self.max_failure_rate
    }
}

pub struct Pipeline {
    config: PipelineConfig,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Pipeline { config })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn out(&self, name: &str) -> PathBuf {
        self.config.run.out_dir.join(name)
    }

    pub fn run_stages(&self, stages: &[Stage]) -> Result<RunOutcome> {
        std::fs::create_dir_all(&self.config.run.out_dir).with_context(|| {
            format!("creating output directory {}", self.config.run.out_dir.display())
        })?;
        for stage in stages {
            log::info!("stage {stage}");
            match stage {
                Stage::Ingest => self.stage_ingest()?,
                Stage::Search => self.stage_search()?,
                Stage::Decode => self.stage_decode()?,
                Stage::Refine => self.stage_refine()?,
                Stage::Answer => self.stage_answer()?,
                Stage::Evaluate => self.stage_evaluate()?,
                Stage::Report => self.stage_report()?,
            }
        }
        self.outcome()
    }

    fn outcome(&self) -> Result<RunOutcome> {
        let queries = load_queries(&self.config.inputs.queries)?;
        let failed = self.failed_queries()?;
        Ok(RunOutcome {
            n_queries: queries.len(),
            n_failed: failed.len(),
            max_failure_rate: self.config.run.max_failure_rate,
        })
    }

    fn load_inputs(&self) -> Result<(Corpus, Vec<QueryCase>, BTreeMap<String, RetrievalRun>)> {
        let corpus = load_corpus(&self.config.inputs.documents, &self.config.inputs.triples)?;
        let queries = load_queries(&self.config.inputs.queries)?;
        let runs = load_retrieval_run(&self.config.inputs.retrieval, &corpus)?;
        Ok((corpus, queries, runs))
    }

    fn stage_ingest(&self) -> Result<()> {
        let (corpus, queries, runs) = self.load_inputs()?;
        let queries_without_run: Vec<String> = queries
            .iter()
            .filter(|q| !runs.contains_key(&q.query_id))
            .map(|q| q.query_id.clone())
            .collect();
        let empty_rankings: Vec<String> = runs
            .values()
            .filter(|r| r.ranked_doc_ids.is_empty())
            .map(|r| r.query_id.clone())
            .collect();
        let summary = IngestSummary {
            documents: corpus.document_count(),
            triples: corpus.triple_count(),
            queries: queries.len(),
            retrieval_runs: runs.len(),
            queries_without_run,
            empty_rankings,
        };
        let json = serde_json::to_string_pretty(&summary)?;
        std::fs::write(self.out("ingest_summary.json"), json + "\n")?;
        Ok(())
    }

    fn keyword_entities(&self, query: &QueryCase, qa: Option<&RemoteQaClient>) -> (Vec<String>, String) {
        if let Some(provided) = &query.keyword_entities {
            if !provided.is_empty() {
                return (provided.clone(), "provided".to_string());
            }
        }
        if let Some(client) = qa {
            match client.extract_entities(ENTITY_EXTRACTION_INSTRUCTION, &query.question) {
                Ok(entities) => return (entities, "llm".to_string()),
                Err(err) => {
                    log::warn!(
                        "entity extraction failed for {}: {err}; falling back to heuristic",
                        query.query_id
                    );
                }
            }
        }
        (heuristic_keyword_entities(&query.question), "heuristic".to_string())
    }

    fn stage_search(&self) -> Result<()> {
        let (corpus, queries, runs) = self.load_inputs()?;
        let provider = EmbeddingProvider::from_config(&self.config.embedding)
            .map_err(|e| anyhow::anyhow!(e.to_string()))?;
        let qa_client = match self.config.qa.backend {
            QaBackendKind::Remote => Some(RemoteQaClient::new(&self.config.qa)?),
            _ => None,
        };

        struct SearchOut {
            keywords: KeywordRow,
            candidates: Vec<CandidateRow>,
        }

        let results: Vec<Result<SearchOut, String>> =
            parallel_map(&queries, self.config.run.workers, |query| {
                let run = runs
                    .get(&query.query_id)
                    .ok_or_else(|| "no retrieval run for query".to_string())?;
                let retrieved: BTreeSet<String> = run.ranked_doc_ids.iter().cloned().collect();
                let (entities, source) = self.keyword_entities(query, qa_client.as_ref());
                let keywords = KeywordRow {
                    query_id: query.query_id.clone(),
                    entities: entities.clone(),
                    source,
                };
                let graph = EvidenceGraph::build(corpus.triples(), &retrieved);
                let mut candidates = Vec::new();
                if graph.edge_count() > 0 && !entities.is_empty() {
                    let query_embedding =
                        provider.embed_one(&query.question).map_err(|e| e.to_string())?;
                    let v_init = graph
                        .identify_initial_nodes(
                            &entities,
                            &provider,
                            self.config.search.node_threshold,
                            self.config.search.fallback_to_best_node,
                        )
                        .map_err(|e| e.to_string())?;
                    let paths = graph
                        .explore_paths(&v_init, &query_embedding, &self.config.search, &provider)
                        .map_err(|e| e.to_string())?;
                    for (i, path) in paths.iter().enumerate() {
                        candidates.push(CandidateRow {
                            query_id: query.query_id.clone(),
                            rank: i + 1,
                            score: path.score,
                            triples: path
                                .forward_triples()
                                .map(|t| {
                                    [t.subject.clone(), t.relation.clone(), t.object.clone()]
                                })
                                .collect(),
                            linearized: path.linearized(),
                        });
                    }
                }
                if candidates.is_empty() {
                    log::warn!("no candidate paths for {}", query.query_id);
                }
                Ok(SearchOut { keywords, candidates })
            });

        let mut keyword_rows = Vec::new();
        let mut candidate_rows = Vec::new();
        let mut failures = Vec::new();
        for (query, result) in queries.iter().zip(results) {
            match result {
                Ok(out) => {
                    keyword_rows.push(out.keywords);
                    candidate_rows.extend(out.candidates);
                }
                Err(error) => failures.push(FailureRow {
                    query_id: query.query_id.clone(),
                    stage: "search".to_string(),
                    error,
                }),
            }
        }
        write_jsonl(&self.out("keywords.jsonl"), &keyword_rows)?;
        write_jsonl(&self.out("candidates.jsonl"), &candidate_rows)?;
        write_jsonl(&self.out("failures_search.jsonl"), &failures)?;
        Ok(())
    }

    fn candidates_by_query(&self) -> Result<BTreeMap<String, Vec<CandidateRow>>> {
        let mut grouped: BTreeMap<String, Vec<CandidateRow>> = BTreeMap::new();
        for (_, row) in read_jsonl::<CandidateRow>(&self.out("candidates.jsonl"))? {
            grouped.entry(row.query_id.clone()).or_default().push(row);
        }
        for rows in grouped.values_mut() {
            rows.sort_by_key(|r| r.rank);
        }
        Ok(grouped)
    }

    fn make_tokenizer(&self) -> Arc<dyn Tokenizer> {
        match self.config.decoder.tokenizer {
            TokenizerKind::Whitespace => Arc::new(WhitespaceTokenizer::new()),
            TokenizerKind::Byte => Arc::new(ByteTokenizer::new()),
        }
    }

    fn stage_decode(&self) -> Result<()> {
        let (corpus, queries, runs) = self.load_inputs()?;
        let grouped = self.candidates_by_query()?;

        let mut chain_rows = Vec::new();
        let mut failures = Vec::new();
        for query in &queries {
            let Some(rows) = grouped.get(&query.query_id) else { continue };
            let mut seen = BTreeSet::new();
            let candidates: Vec<String> = rows
                .iter()
                .map(|r| r.linearized.clone())
                .filter(|text| seen.insert(text.clone()))
                .collect();
            if candidates.is_empty() {
                continue;
            }
            let passages = runs
                .get(&query.query_id)
                .map(|run| passages_for(run.top_n(self.config.decoder.context_docs), &corpus))
                .unwrap_or_default();
            let context = scorer_context(&query.question, &passages);

            let tokenizer = self.make_tokenizer();
            let decode_result = (|| -> std::result::Result<Vec<ChainRow>, String> {
                let tree =
                    PrefixTree::build(&candidates, tokenizer.as_ref()).map_err(|e| e.to_string())?;
                let scorer: Box<dyn TokenScorer> = match self.config.decoder.scorer {
                    ScorerKind::Mock => Box::new(MockTableScorer::uniform()),
                    ScorerKind::Stub => Box::new(SeededScorer::new(
                        self.config.run.seed ^ fnv1a64(query.query_id.as_bytes()),
                    )),
                    ScorerKind::Remote => Box::new(
                        RemoteCompletionScorer::new(
                            &self.config.decoder.remote,
                            Arc::clone(&tokenizer),
                        )
                        .map_err(|e| e.to_string())?,
                    ),
                };
                let decoded = constrained_beam_search(
                    &tree,
                    tokenizer.as_ref(),
                    scorer.as_ref(),
                    &context,
                    self.config.decoder.beam_width,
                    self.config.decoder.max_chains(),
                )
                .map_err(|e| e.to_string())?;
                Ok(decoded
                    .iter()
                    .enumerate()
                    .map(|(i, chain)| ChainRow {
                        query_id: query.query_id.clone(),
                        rank: i + 1,
                        total_logprob: chain.total_logprob,
                        chain_text: chain.text.clone(),
                    })
                    .collect())
            })();
            match decode_result {
                Ok(rows) => chain_rows.extend(rows),
                Err(error) => failures.push(FailureRow {
                    query_id: query.query_id.clone(),
                    stage: "decode".to_string(),
                    error,
                }),
            }
        }
        write_jsonl(&self.out("chains.jsonl"), &chain_rows)?;
        write_jsonl(&self.out("failures_decode.jsonl"), &failures)?;
        Ok(())
    }

    /// Rebuild evidence chains for a query by joining decoded chain text back
    /// to candidate rows and re-attaching triple provenance from the corpus.
    fn chains_for_query(
        &self,
        query_id: &str,
        chain_rows: &[ChainRow],
        candidates: &BTreeMap<String, Vec<CandidateRow>>,
        source_index: &BTreeMap<(String, String, String), BTreeSet<String>>,
    ) -> Vec<EvidenceChain> {
        let Some(rows) = candidates.get(query_id) else { return Vec::new() };
        chain_rows
            .iter()
            .filter(|c| c.query_id == query_id)
            .filter_map(|chain| {
                let candidate = rows.iter().find(|r| r.linearized == chain.chain_text)?;
                let steps = candidate
                    .triples
                    .iter()
                    .map(|[s, r, o]| {
                        let sources = source_index
                            .get(&(s.clone(), r.clone(), o.clone()))
                            .cloned()
                            .unwrap_or_default();
                        OrientedTriple {
                            triple: Triple {
                                subject: s.clone(),
                                relation: r.clone(),
                                object: o.clone(),
                                source_doc_ids: sources,
                            },
                            reversed: false,
                        }
                    })
                    .collect();
                Some(EvidenceChain {
                    chain_index: candidate.rank - 1,
                    text: chain.chain_text.clone(),
                    total_logprob: chain.total_logprob,
                    steps,
                })
            })
            .collect()
    }

    fn source_index(corpus: &Corpus) -> BTreeMap<(String, String, String), BTreeSet<String>> {
        let mut index: BTreeMap<(String, String, String), BTreeSet<String>> = BTreeMap::new();
        for triple in corpus.triples() {
            index
                .entry((triple.subject.clone(), triple.relation.clone(), triple.object.clone()))
                .or_default()
                .extend(triple.source_doc_ids.iter().cloned());
        }
        index
    }

    fn stage_refine(&self) -> Result<()> {
        let (corpus, queries, runs) = self.load_inputs()?;
        let candidates = self.candidates_by_query()?;
        let chain_rows: Vec<ChainRow> =
            read_jsonl(&self.out("chains.jsonl"))?.into_iter().map(|(_, r)| r).collect();
        let source_index = Self::source_index(&corpus);

        let mut refined_rows = Vec::new();
        for query in &queries {
            let Some(run) = runs.get(&query.query_id) else { continue };
            let chains =
                self.chains_for_query(&query.query_id, &chain_rows, &candidates, &source_index);
            let refined = refine(run, &chains, &corpus, &self.config.refine);
            refined_rows.push(RefinedRow {
                query_id: query.query_id.clone(),
                kept_doc_ids: refined.kept_doc_ids,
                dropped_doc_ids: refined.dropped_doc_ids,
                matched_triple_counts: refined
                    .matched_triples
                    .iter()
                    .map(|(doc, triples)| (doc.clone(), triples.len()))
                    .collect(),
            });
        }
        write_jsonl(&self.out("refined.jsonl"), &refined_rows)?;
        Ok(())
    }

    fn stage_answer(&self) -> Result<()> {
        if self.config.qa.backend == QaBackendKind::None {
            log::info!("qa backend is none; skipping answer stage (evaluate will use external answers)");
            return Ok(());
        }
        let (corpus, queries, _runs) = self.load_inputs()?;
        let candidates = self.candidates_by_query()?;
        let chain_rows: Vec<ChainRow> =
            read_jsonl(&self.out("chains.jsonl"))?.into_iter().map(|(_, r)| r).collect();
        let refined: BTreeMap<String, RefinedRow> = read_jsonl(&self.out("refined.jsonl"))?
            .into_iter()
            .map(|(_, r): (usize, RefinedRow)| (r.query_id.clone(), r))
            .collect();
        let source_index = Self::source_index(&corpus);
        let client = match self.config.qa.backend {
            QaBackendKind::Remote => Some(RemoteQaClient::new(&self.config.qa)?),
            _ => None,
        };

        let mut answer_rows = Vec::new();
        let mut failures = Vec::new();
        for query in &queries {
            let chains =
                self.chains_for_query(&query.query_id, &chain_rows, &candidates, &source_index);
            let result: std::result::Result<String, String> = match &client {
                None => Ok(mock_answer(&chains)),
                Some(client) => {
                    let kept = refined
                        .get(&query.query_id)
                        .map(|r| r.kept_doc_ids.clone())
                        .unwrap_or_default();
                    let passages = passages_for(&kept, &corpus);
                    let chain_texts: Vec<String> =
                        chains.iter().map(|c| c.text.clone()).collect();
                    let bundle = assemble_qa_prompt(
                        &query.question,
                        &passages,
                        &chain_texts,
                        self.config.qa.template,
                    );
                    client.answer(&bundle).map_err(|e| e.to_string())
                }
            };
            match result {
                Ok(answer) => {
                    answer_rows.push(AnswerRow { query_id: query.query_id.clone(), answer })
                }
                Err(error) => failures.push(FailureRow {
                    query_id: query.query_id.clone(),
                    stage: "answer".to_string(),
                    error,
                }),
            }
        }
        write_jsonl(&self.out("answers.jsonl"), &answer_rows)?;
        write_jsonl(&self.out("failures_answer.jsonl"), &failures)?;
        Ok(())
    }

    fn load_answers(&self) -> Result<BTreeMap<String, String>> {
        let local = self.out("answers.jsonl");
        let path = if local.exists() {
            Some(local)
        } else {
            self.config.inputs.answers.clone()
        };
        let Some(path) = path else {
            log::warn!("no answers available; answer metrics will be zero");
            return Ok(BTreeMap::new());
        };
        let rows: Vec<AnswerRow> = read_jsonl(&path)?.into_iter().map(|(_, r)| r).collect();
        Ok(rows.into_iter().map(|r| (r.query_id, r.answer)).collect())
    }

    fn failed_queries(&self) -> Result<BTreeMap<String, FailureRow>> {
        let mut failed = BTreeMap::new();
        for stage in ["search", "decode", "answer"] {
            let path = self.out(&format!("failures_{stage}.jsonl"));
            if !path.exists() {
                continue;
            }
            for (_, row) in read_jsonl::<FailureRow>(&path)? {
                failed.entry(row.query_id.clone()).or_insert(row);
            }
        }
        Ok(failed)
    }

    fn stage_evaluate(&self) -> Result<()> {
        let (_corpus, queries, runs) = self.load_inputs()?;
        let refined: BTreeMap<String, RefinedRow> = read_jsonl(&self.out("refined.jsonl"))?
            .into_iter()
            .map(|(_, r): (usize, RefinedRow)| (r.query_id.clone(), r))
            .collect();
        let answers = self.load_answers()?;
        let failed = self.failed_queries()?;

        let mut records = Vec::new();
        for query in &queries {
            if failed.contains_key(&query.query_id) {
                continue;
            }
            let Some(run) = runs.get(&query.query_id) else { continue };
            let context_doc_ids_used = refined
                .get(&query.query_id)
                .map(|r| r.kept_doc_ids.clone())
                .unwrap_or_else(|| run.ranked_doc_ids.clone());
            records.push(EvaluationRecord {
                query_id: query.query_id.clone(),
                gold_answers: query.gold_answers.clone(),
                generated_answer: answers.get(&query.query_id).cloned().unwrap_or_default(),
                gold_support_doc_ids: query.gold_support_doc_ids.clone(),
                context_doc_ids_used,
                retrieved_doc_ids_at_n: run.ranked_doc_ids.clone(),
            });
        }

        let metrics = MetricsReport::compute(&records, self.config.run.recall_n);
        let report = FullReport {
            label: self.config.label.clone(),
            config_echo: self.config.echo_lines(),
            n_queries: queries.len(),
            n_succeeded: records.len(),
            n_failed: failed.len(),
            failures: failed.into_values().collect(),
            metrics,
        };
        let json = serde_json::to_string_pretty(&report)?;
        std::fs::write(self.out("report.json"), json + "\n")?;
        self.render_report(&report)?;
        Ok(())
    }

    fn stage_report(&self) -> Result<()> {
        let path = self.out("report.json");
        let raw = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}; run the evaluate stage first", path.display()))?;
        let report: FullReport = serde_json::from_str(&raw)?;
        self.render_report(&report)?;
        println!("{}", report.metrics.summary_text(&report.label));
        Ok(())
    }

    fn render_report(&self, report: &FullReport) -> Result<()> {
        let mut text = String::new();
        text.push_str("configuration:\n");
        for line in &report.config_echo {
            text.push_str("  ");
            text.push_str(line);
            text.push('\n');
        }
        text.push('\n');
        text.push_str(&report.metrics.summary_text(&report.label));
        text.push('\n');
        text.push_str(&format!(
            "queries: {} total, {} succeeded, {} failed\n",
            report.n_queries, report.n_succeeded, report.n_failed
        ));
        if report.metrics.n_records > report.metrics.n_with_gold {
            text.push_str(&format!(
                "queries without gold support docs (excluded from recall aggregates): {}\n",
                report.metrics.n_records - report.metrics.n_with_gold
            ));
        }
        for failure in &report.failures {
            text.push_str(&format!(
                "failed {} at {}: {}\n",
                failure.query_id, failure.stage, failure.error
            ));
        }
        std::fs::write(self.out("report.txt"), text)?;

        let mut csv_text = MetricsReport::summary_csv_header(report.metrics.n);
        csv_text.push('\n');
        csv_text.push_str(&report.metrics.summary_csv_row(&report.label));
        csv_text.push('\n');
        std::fs::write(self.out("report.csv"), csv_text)?;

        let mut writer = csv::Writer::from_path(self.out("per_query.csv"))?;
        writer.write_record([
            "query_id",
            "status",
            "em",
            "f1",
            "recall_at_n",
            "rcr",
            "docs_used",
            "irrelevant_docs",
        ])?;
        for row in &report.metrics.rows {
            writer.write_record([
                row.query_id.clone(),
                "ok".to_string(),
                (row.em as u8).to_string(),
                format!("{:.4}", row.f1),
                row.recall_at_n.map(|r| format!("{r:.4}")).unwrap_or_default(),
                row.rcr.map(|r| format!("{r:.4}")).unwrap_or_default(),
                row.docs_used.to_string(),
                row.irrelevant_docs.to_string(),
            ])?;
        }
        for failure in &report.failures {
            writer.write_record([
                failure.query_id.clone(),
                format!("failed:{}", failure.stage),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }
}

fn passages_for(doc_ids: &[String], corpus: &Corpus) -> Vec<(String, String)> {
    doc_ids
        .iter()
        .filter_map(|id| corpus.document(id))
        .map(|doc| (doc.title.clone(), doc.text.clone()))
        .collect()
}

/// Order-preserving bounded-parallel map. Results come back in input order
/// regardless of worker count, so downstream writes stay deterministic.
fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    workers: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let mut results: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|scope| {
        for (slot_chunk, item_chunk) in results.chunks_mut(chunk).zip(items.chunks(chunk)) {
            let f = &f;
            scope.spawn(move || {
                for (slot, item) in slot_chunk.iter_mut().zip(item_chunk) {
                    *slot = Some(f(item));
                }
            });
        }
    });
    results.into_iter().map(|r| r.expect("worker filled every slot")).collect()
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for byte in bytes {
        hash ^= *byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
