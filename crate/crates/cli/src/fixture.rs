//! Deterministic synthetic fixture generator.
//!
//! Builds a small multi-hop corpus with known gold documents and planted
//! distractors. Each query follows the same two-hop shape:
//!
//!   CastelN --anchors--> HarborN --signals--> LumenN
//!
//! The first gold document carries the first hop, the second gold document
//! the second hop, and three noise documents carry unrelated facts. The
//! retrieval run places the second gold document at varying ranks so the
//! filtering stage has real salvage work to do, while the noise documents
//! give it something to drop. Everything is a pure function of the query
//! index, so regeneration is byte-stable.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{Context, Result};

use chainsift_core::embed::{cosine, DeterministicBackend, EmbeddingBackend};
use chainsift_core::ingest::{write_jsonl, Document, QueryCase, RetrievalRun, Triple};

use crate::config::PipelineConfig;

struct QueryPlan {
    query_id: String,
    castle: String,
    harbor: String,
    beacon: String,
    question: String,
}

fn plan_with_salt(i: usize, salt: u8) -> QueryPlan {
    let suffix = if salt == 0 { String::new() } else { ((b'a' + salt - 1) as char).to_string() };
    let castle = format!("Castel{i}{suffix}");
    let harbor = format!("Harbor{i}{suffix}");
    let beacon = format!("Lumen{i}{suffix}");
    let question = format!("What beacon does {castle} anchors {harbor} signals ?");
    QueryPlan { query_id: format!("q{i:02}"), castle, harbor, beacon, question }
}

/// Entity names are salted per query until both gold hops clear the edge
/// threshold with margin under the deterministic embedding; the hashed-bag
/// space has occasional bucket collisions and this keeps the fixture's
/// mechanism guarantees independent of them. The first passing salt wins,
/// so generation stays byte-stable.
fn plan(i: usize) -> QueryPlan {
    let backend = DeterministicBackend::new(256);
    for salt in 0..26u8 {
        let p = plan_with_salt(i, salt);
        let question = backend.embed_batch(&[p.question.as_str()]).unwrap().remove(0);
        let hops = [
            format!("{} anchors {}", p.castle, p.harbor),
            format!("{} signals {}", p.harbor, p.beacon),
        ];
        let ok = hops.iter().all(|text| {
            let triple = backend.embed_batch(&[text.as_str()]).unwrap().remove(0);
            cosine(&triple, &question).unwrap() >= 0.35
        });
        if ok {
            return p;
        }
    }
    panic!("no salt produced collision-free entity names for query {i}");
}

fn docs(set: &[&str]) -> BTreeSet<String> {
    set.iter().map(|s| s.to_string()).collect()
}

/// Write the full fixture (documents, triples, queries, retrieval run,
/// external answers, and a ready-to-run config) into `dir`.
pub fn generate(dir: &Path, n_queries: usize) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;

    let mut documents = Vec::new();
    let mut triples = Vec::new();
    let mut queries = Vec::new();
    let mut runs = Vec::new();
    let mut answers = Vec::new();

    for i in 0..n_queries {
        let p = plan(i);
        let g1 = format!("{}-g1", p.query_id);
        let g2 = format!("{}-g2", p.query_id);
        let n1 = format!("{}-n1", p.query_id);
        let n2 = format!("{}-n2", p.query_id);
        let n3 = format!("{}-n3", p.query_id);

        documents.push(Document {
            doc_id: g1.clone(),
            title: p.castle.clone(),
            text: format!(
                "{castle} anchors {harbor} across the old quay. Keepers of {castle} tend the channel lights through every season.",
                castle = p.castle,
                harbor = p.harbor
            ),
        });
        let mut g2_text = format!(
            "{harbor} signals {beacon} when the fog settles. Pilots watch for {beacon} over the breakwater at dusk.",
            harbor = p.harbor,
            beacon = p.beacon
        );
        if i % 11 == 3 {
            // Light rephrasing: provenance still links the triple to this
            // document even though the exact surface form is gone.
            g2_text = format!(
                "{harbor} sends its signal toward {beacon} when the fog settles.",
                harbor = p.harbor,
                beacon = p.beacon
            );
        }
        documents.push(Document { doc_id: g2.clone(), title: p.harbor.clone(), text: g2_text });
        documents.push(Document {
            doc_id: n1.clone(),
            title: format!("Drift{i}"),
            text: format!("Drift{i} gathers moss near the sunken stair. Nothing here concerns the harbor question."),
        });
        let mut n2_text = format!(
            "Thicket{i} hides a rusted gate. Travelers avoid the marsh road after rain."
        );
        if i % 7 == 0 {
            // Planted surface form with casing and spacing noise: only the
            // normalized substring matcher can salvage this one.
            n2_text.push_str(&format!(
                " An old log reads: {}   SIGNALS   {}.",
                p.harbor.to_lowercase(),
                p.beacon.to_lowercase()
            ));
        }
        documents.push(Document { doc_id: n2.clone(), title: format!("Thicket{i}"), text: n2_text });
        documents.push(Document {
            doc_id: n3.clone(),
            title: format!("Quarry{i}"),
            text: format!("Quarry{i} lies empty. Wagons once carried granite to distant towns."),
        });

        triples.push(Triple {
            subject: p.castle.clone(),
            relation: "anchors".into(),
            object: p.harbor.clone(),
            source_doc_ids: docs(&[&g1]),
        });
        if i % 9 == 0 {
            // Same fact extracted from the second document too; the graph
            // must merge these into one edge.
            triples.push(Triple {
                subject: p.castle.clone(),
                relation: "anchors".into(),
                object: p.harbor.clone(),
                source_doc_ids: docs(&[&g2]),
            });
        }
        triples.push(Triple {
            subject: p.harbor.clone(),
            relation: "signals".into(),
            object: p.beacon.clone(),
            source_doc_ids: docs(&[&g2]),
        });
        triples.push(Triple {
            subject: format!("Drift{i}"),
            relation: "gathers".into(),
            object: format!("Moss{i}"),
            source_doc_ids: docs(&[&n1]),
        });
        triples.push(Triple {
            subject: format!("Thicket{i}"),
            relation: "hides".into(),
            object: format!("Gate{i}"),
            source_doc_ids: docs(&[&n2]),
        });

        queries.push(QueryCase {
            query_id: p.query_id.clone(),
            question: p.question.clone(),
            gold_answers: vec![format!("{} beacon", p.beacon)],
            gold_support_doc_ids: docs(&[&g1, &g2]),
            // Half the queries supply entities; the other half exercise the
            // extraction heuristic.
            keyword_entities: if i % 2 == 0 { Some(vec![p.castle.clone()]) } else { None },
        });

        let ranked: Vec<String> = match i % 5 {
            0 => vec![g1, g2, n1, n2, n3],
            1 => vec![g1, n1, g2, n2, n3],
            2 => vec![g1, n1, n2, g2, n3],
            3 => vec![g1, n1, n2, n3, g2],
            _ => vec![n1, g1, n2, g2, n3],
        };
        runs.push(RetrievalRun { query_id: p.query_id.clone(), ranked_doc_ids: ranked, scores: None });

        let answer = match i % 10 {
            7 => p.beacon.clone(),
            8 => format!("the {} beacon!", p.beacon),
            9 => "Nimbus stone".to_string(),
            _ => format!("{} beacon", p.beacon),
        };
        answers.push(AnswerRow { query_id: p.query_id.clone(), answer });
    }

    write_jsonl(&dir.join("documents.jsonl"), &documents)?;
    write_jsonl(&dir.join("triples.jsonl"), &triples)?;
    write_jsonl(&dir.join("queries.jsonl"), &queries)?;
    write_jsonl(&dir.join("retrieval.jsonl"), &runs)?;
    write_jsonl(&dir.join("answers.jsonl"), &answers)?;

    let config = fixture_config(n_queries);
    let toml_text = toml::to_string_pretty(&config)?;
    std::fs::write(dir.join("config.toml"), toml_text)?;
    Ok(())
}

#[derive(serde::Serialize, serde::Deserialize)]
struct AnswerRow {
    query_id: String,
    answer: String,
}

/// The bundled run configuration: offline backends, a slightly relaxed edge
/// threshold suited to the hashed-bag embedding space, everything else at
/// defaults.
pub fn fixture_config(n_queries: usize) -> PipelineConfig {
    let mut config =
        PipelineConfig { label: format!("synthetic-{n_queries}"), ..PipelineConfig::default() };
    config.inputs.answers = Some("answers.jsonl".into());
    config.embedding.cache_capacity = 8192;
    config.search.edge_threshold = 0.30;
    config.run.seed = 42;
    config
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate(a.path(), 10).unwrap();
        generate(b.path(), 10).unwrap();
        for name in ["documents.jsonl", "triples.jsonl", "queries.jsonl", "retrieval.jsonl", "answers.jsonl", "config.toml"] {
            let left = std::fs::read(a.path().join(name)).unwrap();
            let right = std::fs::read(b.path().join(name)).unwrap();
            assert_eq!(left, right, "{name} differs between runs");
        }
    }

    #[test]
    fn fixture_loads_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        generate(dir.path(), 10).unwrap();
        let corpus = chainsift_core::ingest::load_corpus(
            &dir.path().join("documents.jsonl"),
            &dir.path().join("triples.jsonl"),
        )
        .unwrap();
        assert_eq!(corpus.document_count(), 50);
        let queries = chainsift_core::ingest::load_queries(&dir.path().join("queries.jsonl")).unwrap();
        assert_eq!(queries.len(), 10);
        let runs =
            chainsift_core::ingest::load_retrieval_run(&dir.path().join("retrieval.jsonl"), &corpus)
                .unwrap();
        assert_eq!(runs.len(), 10);
        for run in runs.values() {
            assert_eq!(run.ranked_doc_ids.len(), 5);
        }
    }
}
