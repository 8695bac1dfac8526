//! Answer and retrieval-quality metrics.
//!
//! Answer scoring follows the extractive-QA convention: casefold, strip
//! ASCII punctuation, drop the articles a/an/the, collapse whitespace, then
//! compare token bags. Retrieval is scored as Recall@n over gold support
//! documents. The recall conversion rate (RCR) is answer F1 divided by
//! retrieval recall, expressed in percent — it measures how much of what was
//! retrieved converts into correct answers, and can exceed 100 when answers
//! outrun retrieval. ATD/AID are the average total and average
//! gold-irrelevant documents handed to the answering model.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// Everything needed to score one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub query_id: String,
    pub gold_answers: Vec<String>,
    pub generated_answer: String,
    pub gold_support_doc_ids: BTreeSet<String>,
    /// The documents actually given to the answering model (post-filtering).
    pub context_doc_ids_used: Vec<String>,
    /// The original ranked retrieval, for Recall@n.
    pub retrieved_doc_ids_at_n: Vec<String>,
}

/// Normalize an answer string: casefold, strip ASCII punctuation, drop
/// a/an/the, collapse whitespace.
pub fn normalize_answer(s: &str) -> String {
    let lowered = s.to_lowercase();
    let no_punct: String = lowered.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    no_punct
        .split_whitespace()
        .filter(|tok| !matches!(*tok, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn answer_tokens(s: &str) -> Vec<String> {
    normalize_answer(s).split_whitespace().map(|t| t.to_string()).collect()
}

/// Token-bag F1 between one prediction and one gold answer.
fn f1_single(generated: &str, gold: &str) -> f64 {
    let pred = answer_tokens(generated);
    let gold = answer_tokens(gold);
    if pred.is_empty() || gold.is_empty() {
        return if pred == gold { 1.0 } else { 0.0 };
    }
    let mut counts: BTreeMap<&str, i64> = BTreeMap::new();
    for tok in &gold {
        *counts.entry(tok.as_str()).or_default() += 1;
    }
    let mut overlap = 0i64;
    for tok in &pred {
        if let Some(count) = counts.get_mut(tok.as_str()) {
            if *count > 0 {
                *count -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred.len() as f64;
    let recall = overlap as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Best token-bag F1 over the gold aliases, in [0, 1].
pub fn answer_f1(generated: &str, golds: &[String]) -> f64 {
    golds.iter().map(|g| f1_single(generated, g)).fold(0.0, f64::max)
}

/// 1 iff the normalized prediction equals any normalized gold alias.
pub fn exact_match(generated: &str, golds: &[String]) -> bool {
    let pred = normalize_answer(generated);
    golds.iter().any(|g| normalize_answer(g) == pred)
}

/// Fraction of gold support documents present in the top-n retrieved.
/// `None` when the record carries no gold support set (such records are
/// excluded from retrieval aggregates but still counted in the report).
pub fn recall_at_n(record: &EvaluationRecord, n: usize) -> Option<f64> {
    if record.gold_support_doc_ids.is_empty() {
        return None;
    }
    let top: BTreeSet<&String> = record.retrieved_doc_ids_at_n.iter().take(n).collect();
    let hit = record.gold_support_doc_ids.iter().filter(|d| top.contains(d)).count();
    Some(hit as f64 / record.gold_support_doc_ids.len() as f64)
}

/// Recall conversion rate in percent: f1 / recall when recall is positive,
/// else 0. Inputs may be fractions or percentages as long as they agree.
pub fn rcr(f1: f64, recall: f64) -> f64 {
    if recall > 0.0 {
        100.0 * f1 / recall
    } else {
        0.0
    }
}

/// Average total documents and average gold-irrelevant documents used,
/// computed over all records (callers ensure gold sets are present).
pub fn atd_aid(records: &[EvaluationRecord]) -> (f64, f64) {
    if records.is_empty() {
        return (0.0, 0.0);
    }
    let n = records.len() as f64;
    let total: usize = records.iter().map(|r| r.context_doc_ids_used.len()).sum();
    let irrelevant: usize = records
        .iter()
        .map(|r| {
            r.context_doc_ids_used
                .iter()
                .filter(|d| !r.gold_support_doc_ids.contains(*d))
                .count()
        })
        .sum();
    (total as f64 / n, irrelevant as f64 / n)
}

/// One scored query in the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryRow {
    pub query_id: String,
    pub em: bool,
    pub f1: f64,
    /// Absent when the record has no gold support documents.
    pub recall_at_n: Option<f64>,
    /// Per-query conversion rate in percent (zero when recall is zero).
    pub rcr: Option<f64>,
    pub docs_used: usize,
    pub irrelevant_docs: usize,
}

/// Corpus-level aggregates plus per-query rows.
///
/// Two RCR aggregations are reported: the ratio of aggregate F1 to aggregate
/// recall (the headline number), and the mean of per-query ratios (kept as a
/// secondary column so the aggregation choice stays inspectable).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub n_records: usize,
    pub n_with_gold: usize,
    pub em_pct: f64,
    pub f1_pct: f64,
    pub recall_pct: f64,
    pub rcr_pct: f64,
    pub rcr_mean_per_query_pct: f64,
    pub atd: f64,
    pub aid: f64,
    pub rows: Vec<QueryRow>,
}

impl MetricsReport {
    pub fn compute(records: &[EvaluationRecord], n: usize) -> MetricsReport {
        let mut rows = Vec::with_capacity(records.len());
        let mut em_sum = 0.0;
        let mut f1_sum = 0.0;
        let mut recall_sum = 0.0;
        let mut rcr_sum = 0.0;
        let mut with_gold = 0usize;
        for record in records {
            let em = exact_match(&record.generated_answer, &record.gold_answers);
            let f1 = answer_f1(&record.generated_answer, &record.gold_answers);
            let recall = recall_at_n(record, n);
            let row_rcr = recall.map(|r| rcr(f1, r));
            em_sum += em as u8 as f64;
            f1_sum += f1;
            if let Some(r) = recall {
                recall_sum += r;
                rcr_sum += row_rcr.unwrap_or(0.0);
                with_gold += 1;
            }
            let irrelevant = record
                .context_doc_ids_used
                .iter()
                .filter(|d| !record.gold_support_doc_ids.contains(*d))
                .count();
            rows.push(QueryRow {
                query_id: record.query_id.clone(),
                em,
                f1,
                recall_at_n: recall,
                rcr: row_rcr,
                docs_used: record.context_doc_ids_used.len(),
                irrelevant_docs: irrelevant,
            });
        }
        let n_records = records.len();
        let mean = |sum: f64, count: usize| if count == 0 { 0.0 } else { sum / count as f64 };
        let f1_mean = mean(f1_sum, n_records);
        let recall_mean = mean(recall_sum, with_gold);
        let (atd, aid) = atd_aid(records);
        MetricsReport {
            n,
            n_records,
            n_with_gold: with_gold,
            em_pct: 100.0 * mean(em_sum, n_records),
            f1_pct: 100.0 * f1_mean,
            recall_pct: 100.0 * recall_mean,
            rcr_pct: rcr(f1_mean, recall_mean),
            rcr_mean_per_query_pct: mean(rcr_sum, with_gold),
            atd,
            aid,
            rows,
        }
    }

    /// Fixed-width summary table, one row per label.
    pub fn summary_text(&self, label: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<16} {:>8} {:>8} {:>8} {:>8} {:>10} {:>8} {:>8}\n",
            "split",
            format!("R@{}", self.n),
            "EM",
            "F1",
            "RCR",
            "RCR(mean)",
            "ATD",
            "AID"
        ));
        out.push_str(&format!(
            "{:<16} {:>8.1} {:>8.1} {:>8.1} {:>8.1} {:>10.1} {:>8.2} {:>8.2}\n",
            label,
            self.recall_pct,
            self.em_pct,
            self.f1_pct,
            self.rcr_pct,
            self.rcr_mean_per_query_pct,
            self.atd,
            self.aid
        ));
        out
    }

    pub fn summary_csv_header(n: usize) -> String {
        format!("split,recall_at_{n},em,f1,rcr,rcr_mean_per_query,atd,aid,n_records,n_with_gold")
    }

    pub fn summary_csv_row(&self, label: &str) -> String {
        format!(
            "{label},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{},{}",
            self.recall_pct,
            self.em_pct,
            self.f1_pct,
            self.rcr_pct,
            self.rcr_mean_per_query_pct,
            self.atd,
            self.aid,
            self.n_records,
            self.n_with_gold
        )
    }
}
