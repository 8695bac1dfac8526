//! Prompt assembly and keyword-entity extraction.

use serde::{Deserialize, Serialize};

use crate::config::TemplateId;

/// Instruction for large answer models: reason after "Thought:", conclude
/// with "Answer:".
pub const LARGE_MODEL_INSTRUCTION: &str = "As an advanced reading comprehension assistant, your task is to analyze text passages and corresponding questions meticulously. Note!: Information association paths serve as reference pointers to surface latent connections. Your response start after \"Thought:\", where you will methodically break down the reasoning process, illustrating how you arrive at conclusions. Conclude with \"Answer:\" to present a concise, definitive response, devoid of additional elaborations.";

/// Instruction for small answer models: answer only.
pub const SMALL_MODEL_INSTRUCTION: &str = "Given some contexts, candidate evidence chains, and a question, the chain be used to help find potential associative information. please only output the answer to the question.";

/// Instruction used when an LM backend extracts keyword entities. Pinned
/// here so runs are comparable across versions.
pub const ENTITY_EXTRACTION_INSTRUCTION: &str = "Extract the key named entities from the question. Output one entity per line and nothing else.";

pub const ASSOCIATION_PATH_HEADER: &str = "# Information association path:";

/// System plus per-query user text, byte-stable given the same inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPromptBundle {
    pub system: String,
    pub user: String,
}

/// Render the answering prompt: passage blocks, the question, the
/// association-path list (omitted entirely when there are no chains), and a
/// "Thought:" cue for the large-model template.
pub fn assemble_qa_prompt(
    question: &str,
    passages: &[(String, String)],
    chains: &[String],
    template: TemplateId,
) -> QaPromptBundle {
    let system = match template {
        TemplateId::LargeModel => LARGE_MODEL_INSTRUCTION.to_string(),
        TemplateId::SmallModel => SMALL_MODEL_INSTRUCTION.to_string(),
    };
    let mut user = String::new();
    for (title, text) in passages {
        user.push_str("Wikipedia Title: ");
        user.push_str(title);
        user.push('\n');
        user.push_str(text);
        user.push_str("\n\n");
    }
    user.push_str("# Question: ");
    user.push_str(question);
    user.push('\n');
    if !chains.is_empty() {
        user.push_str(ASSOCIATION_PATH_HEADER);
        user.push_str(" [");
        for (i, chain) in chains.iter().enumerate() {
            if i > 0 {
                user.push_str(", ");
            }
            user.push('\'');
            user.push_str(chain);
            user.push('\'');
        }
        user.push_str("]\n");
    }
    if template == TemplateId::LargeModel {
        user.push_str("Thought:");
    }
    QaPromptBundle { system, user }
}

/// Context handed to the constrained decoder's scorer: the small-model
/// instruction, the passages, the question, and the association-path header
/// as the generation cue.
pub fn scorer_context(question: &str, passages: &[(String, String)]) -> String {
    let mut out = String::new();
    out.push_str(SMALL_MODEL_INSTRUCTION);
    out.push_str("\n\n");
    for (title, text) in passages {
        out.push_str("Wikipedia Title: ");
        out.push_str(title);
        out.push('\n');
        out.push_str(text);
        out.push_str("\n\n");
    }
    out.push_str("# Question: ");
    out.push_str(question);
    out.push('\n');
    out.push_str(ASSOCIATION_PATH_HEADER);
    out
}

const QUESTION_WORDS: [&str; 18] = [
    "who", "what", "when", "where", "which", "whom", "whose", "why", "how", "is", "are", "was",
    "were", "do", "does", "did", "the", "a",
];

const STOPWORDS: [&str; 24] = [
    "the", "a", "an", "of", "in", "on", "at", "to", "for", "and", "or", "by", "with", "from",
    "is", "are", "was", "were", "be", "been", "that", "this", "it", "its",
];

/// Deterministic keyword-entity heuristic, used when the query file supplies
/// no entities and no LM backend is configured:
///
/// 1. Strip surrounding punctuation from each whitespace token.
/// 2. Collect maximal runs of capitalized tokens as entity spans, ignoring a
///    leading question word even when capitalized.
/// 3. If no span is found, fall back to lowercased content tokens (not in
///    the stopword list, at least three characters), deduplicated in order.
pub fn heuristic_keyword_entities(question: &str) -> Vec<String> {
    let tokens: Vec<&str> = question
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| c.is_ascii_punctuation()))
        .filter(|t| !t.is_empty())
        .collect();

    let mut spans: Vec<String> = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for (i, token) in tokens.iter().enumerate() {
        let capitalized = token.chars().next().map(|c| c.is_uppercase()).unwrap_or(false);
        let leading_question_word = i == 0 && QUESTION_WORDS.contains(&token.to_lowercase().as_str());
        if capitalized && !leading_question_word {
            current.push(token);
        } else if !current.is_empty() {
            spans.push(current.join(" "));
            current.clear();
        }
    }
    if !current.is_empty() {
        spans.push(current.join(" "));
    }
    if !spans.is_empty() {
        spans.dedup();
        return spans;
    }

    let mut seen = std::collections::BTreeSet::new();
    tokens
        .iter()
        .map(|t| t.to_lowercase())
        .filter(|t| {
            t.len() >= 3
                && !STOPWORDS.contains(&t.as_str())
                && !QUESTION_WORDS.contains(&t.as_str())
        })
        .filter(|t| seen.insert(t.clone()))
        .collect()
}
