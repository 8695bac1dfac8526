//! Pipeline configuration: one TOML file covering inputs, every tunable of
//! the search/decode/refine stages, backends, and run control. Relative
//! input paths resolve against the config file's directory.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use chainsift_core::decode::RemoteScorerConfig;
use chainsift_core::embed::{EmbeddingBackendKind, EmbeddingConfig};
use chainsift_core::graph::SearchConfig;
use chainsift_core::refine::{MatchNorm, RefineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Search,
    Decode,
    Refine,
    Answer,
    Evaluate,
    Report,
}

impl Stage {
    pub const ORDER: [Stage; 7] = [
        Stage::Ingest,
        Stage::Search,
        Stage::Decode,
        Stage::Refine,
        Stage::Answer,
        Stage::Evaluate,
        Stage::Report,
    ];

    pub fn parse(name: &str) -> Result<Stage> {
        Ok(match name.trim().to_ascii_lowercase().as_str() {
            "ingest" => Stage::Ingest,
            "search" => Stage::Search,
            "decode" => Stage::Decode,
            "refine" => Stage::Refine,
            "answer" => Stage::Answer,
            "evaluate" => Stage::Evaluate,
            "report" => Stage::Report,
            other => bail!("unknown stage {other:?}"),
        })
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Ingest => "ingest",
            Stage::Search => "search",
            Stage::Decode => "decode",
            Stage::Refine => "refine",
            Stage::Answer => "answer",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct InputPaths {
    pub documents: PathBuf,
    pub triples: PathBuf,
    pub queries: PathBuf,
    pub retrieval: PathBuf,
    /// Externally produced answers keyed by query_id; used by `evaluate`
    /// when the answer stage did not run.
    pub answers: Option<PathBuf>,
}

impl Default for InputPaths {
    fn default() -> Self {
        InputPaths {
            documents: "documents.jsonl".into(),
            triples: "triples.jsonl".into(),
            queries: "queries.jsonl".into(),
            retrieval: "retrieval.jsonl".into(),
            answers: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    /// Uniform mock table (pure tie-break ordering).
    Mock,
    /// Seeded pseudo-random scorer; the run seed controls it.
    Stub,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerKind {
    Whitespace,
    Byte,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DecoderConfig {
    pub scorer: ScorerKind,
    pub tokenizer: TokenizerKind,
    pub beam_width: usize,
    /// Defaults to `beam_width` when absent.
    pub max_chains: Option<usize>,
    /// How many top-ranked documents go into the decoding prompt context.
    pub context_docs: usize,
    pub remote: RemoteScorerConfig,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            scorer: ScorerKind::Stub,
            tokenizer: TokenizerKind::Whitespace,
            beam_width: 5,
            max_chains: None,
            context_docs: 5,
            remote: RemoteScorerConfig::default(),
        }
    }
}

impl DecoderConfig {
    pub fn max_chains(&self) -> usize {
        self.max_chains.unwrap_or(self.beam_width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QaBackendKind {
    /// Skip the answer stage; evaluation reads external answers.
    None,
    /// Deterministic offline answerer (endpoint of the best chain).
    Mock,
    /// OpenAI-compatible chat completions endpoint.
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemplateId {
    #[serde(rename = "large-model")]
    LargeModel,
    #[serde(rename = "small-model")]
    SmallModel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct QaConfig {
    pub backend: QaBackendKind,
    pub endpoint: Option<String>,
    pub model_name: Option<String>,
    pub template: TemplateId,
    pub max_output_tokens: usize,
    pub api_key_env: Option<String>,
    pub retries: usize,
}

impl Default for QaConfig {
    fn default() -> Self {
        QaConfig {
            backend: QaBackendKind::None,
            endpoint: None,
            model_name: None,
            template: TemplateId::SmallModel,
            max_output_tokens: 64,
            api_key_env: None,
            retries: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunControl {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub stages: Vec<Stage>,
    /// Recall cutoff n for Recall@n and the conversion rate.
    pub recall_n: usize,
    pub workers: usize,
    /// Run exits nonzero when failed/total exceeds this bound.
    pub max_failure_rate: f64,
}

impl Default for RunControl {
    fn default() -> Self {
        RunControl {
            out_dir: "out".into(),
            seed: 42,
            stages: Stage::ORDER.to_vec(),
            recall_n: 5,
            workers: 1,
            max_failure_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Split label echoed into reports.
    pub label: String,
    pub inputs: InputPaths,
    pub embedding: EmbeddingConfig,
    pub search: SearchConfig,
    pub decoder: DecoderConfig,
    pub refine: RefineConfig,
    pub qa: QaConfig,
    pub run: RunControl,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config: PipelineConfig =
            toml::from_str(&raw).with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(base) = path.parent() {
            config.anchor_paths(base);
        }
        if config.label.is_empty() {
            config.label = path
                .parent()
                .and_then(|p| p.file_name())
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".to_string());
        }
        Ok(config)
    }

    fn anchor_paths(&mut self, base: &Path) {
        let anchor = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        anchor(&mut self.inputs.documents);
        anchor(&mut self.inputs.triples);
        anchor(&mut self.inputs.queries);
        anchor(&mut self.inputs.retrieval);
        if let Some(answers) = &mut self.inputs.answers {
            anchor(answers);
        }
    }

    /// Check cross-field consistency and that the stage list is a prefix of
    /// the pipeline order (the optional `answer` stage may be omitted).
    pub fn validate(&self) -> Result<()> {
        self.embedding.validate().map_err(|e| anyhow::anyhow!(e.to_string()))?;
        self.search.validate().map_err(|e| anyhow::anyhow!(e.to_string()))?;
        if self.decoder.beam_width == 0 {
            bail!("decoder.beam_width must be at least 1");
        }
        if self.run.recall_n == 0 {
            bail!("run.recall_n must be at least 1");
        }
        if self.run.workers == 0 {
            bail!("run.workers must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.run.max_failure_rate) {
            bail!("run.max_failure_rate must lie in [0, 1]");
        }
        if self.decoder.scorer == ScorerKind::Remote
            && (self.decoder.remote.endpoint.is_none() || self.decoder.remote.model_name.is_none())
        {
            bail!("decoder.scorer = remote requires decoder.remote.endpoint and model_name");
        }
        if self.qa.backend == QaBackendKind::Remote
            && (self.qa.endpoint.is_none() || self.qa.model_name.is_none())
        {
            bail!("qa.backend = remote requires qa.endpoint and qa.model_name");
        }
        validate_stage_prefix(&self.run.stages)?;
        Ok(())
    }

    /// Swap every remote backend for its offline counterpart.
    pub fn force_mock_backends(&mut self) {
        self.embedding.backend = EmbeddingBackendKind::DeterministicLocal;
        if self.decoder.scorer == ScorerKind::Remote {
            self.decoder.scorer = ScorerKind::Stub;
        }
        if self.qa.backend == QaBackendKind::Remote {
            self.qa.backend = QaBackendKind::Mock;
        }
    }

    /// Literal substring matching, no provenance shortcut, forward edges only.
    pub fn force_strict_paper_mode(&mut self) {
        self.refine.match_normalization = MatchNorm::Exact;
        self.refine.use_provenance = false;
        self.search.allow_reverse_edges = false;
    }

    /// Hyperparameter echo for report headers: every stage tunable in one
    /// place.
    pub fn echo_lines(&self) -> Vec<String> {
        vec![
            format!("label: {}", self.label),
            format!(
                "embedding: backend={:?} dim={} cache={}",
                self.embedding.backend, self.embedding.dim, self.embedding.cache_capacity
            ),
            format!(
                "search: node_threshold={} edge_threshold={} boost_threshold={} length_decay={} boost_factor={} expected_max_len={} max_hops={} max_candidates={} allow_reverse_edges={} fallback_to_best_node={}",
                self.search.node_threshold,
                self.search.edge_threshold,
                self.search.boost_threshold,
                self.search.length_decay,
                self.search.boost_factor,
                self.search.expected_max_len,
                self.search.max_hops,
                self.search.max_candidates,
                self.search.allow_reverse_edges,
                self.search.fallback_to_best_node,
            ),
            format!(
                "decoder: scorer={:?} tokenizer={:?} beam_width={} max_chains={} context_docs={}",
                self.decoder.scorer,
                self.decoder.tokenizer,
                self.decoder.beam_width,
                self.decoder.max_chains(),
                self.decoder.context_docs,
            ),
            format!(
                "refine: top_n={} match_normalization={:?} use_provenance={}",
                self.refine.top_n, self.refine.match_normalization, self.refine.use_provenance
            ),
            format!("qa: backend={:?} template={:?}", self.qa.backend, self.qa.template),
            format!(
                "run: seed={} recall_n={} workers={} max_failure_rate={}",
                self.run.seed, self.run.recall_n, self.run.workers, self.run.max_failure_rate
            ),
        ]
    }
}

fn validate_stage_prefix(stages: &[Stage]) -> Result<()> {
    if stages.is_empty() {
        bail!("run.stages must name at least one stage");
    }
    let mut positions = Vec::new();
    for stage in stages {
        let pos = Stage::ORDER.iter().position(|s| s == stage).expect("known stage");
        positions.push(pos);
    }
    let mut sorted = positions.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != positions.len() {
        bail!("run.stages contains duplicates");
    }
    if positions != sorted {
        bail!("run.stages must follow the pipeline order: {:?}", Stage::ORDER);
    }
    // Contiguous prefix, except `answer` may be skipped.
    let answer_pos = Stage::ORDER.iter().position(|s| *s == Stage::Answer).expect("answer stage");
    let mut expected = 0usize;
    for &pos in &sorted {
        if pos == expected {
            expected += 1;
        } else if expected == answer_pos && pos == answer_pos + 1 {
            expected = pos + 1;
        } else {
            bail!(
                "run.stages must form a prefix of the pipeline order (answer may be omitted); got a gap before {}",
                Stage::ORDER[pos]
            );
        }
    }
    Ok(())
}

pub fn parse_stage_list(raw: &str) -> Result<Vec<Stage>> {
    raw.split([',', '+']).filter(|s| !s.trim().is_empty()).map(Stage::parse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn stage_prefix_rules() {
        use Stage::*;
        assert!(validate_stage_prefix(&[Ingest]).is_ok());
        assert!(validate_stage_prefix(&[Ingest, Search]).is_ok());
        assert!(validate_stage_prefix(&Stage::ORDER).is_ok());
        // answer is optional
        assert!(validate_stage_prefix(&[Ingest, Search, Decode, Refine, Evaluate]).is_ok());
        assert!(validate_stage_prefix(&[Ingest, Search, Decode, Refine, Evaluate, Report]).is_ok());
        // gaps and disorder rejected
        assert!(validate_stage_prefix(&[Search]).is_err());
        assert!(validate_stage_prefix(&[Ingest, Decode]).is_err());
        assert!(validate_stage_prefix(&[Search, Ingest]).is_err());
        assert!(validate_stage_prefix(&[]).is_err());
    }

    #[test]
    fn parse_stage_list_accepts_csv() {
        let stages = parse_stage_list("ingest,search").unwrap();
        assert_eq!(stages, vec![Stage::Ingest, Stage::Search]);
        assert!(parse_stage_list("bogus").is_err());
    }

    #[test]
    fn toml_round_trip_with_overrides() {
        let raw = r#"
            label = "demo"
            [inputs]
            documents = "docs.jsonl"
            triples = "triples.jsonl"
            queries = "queries.jsonl"
            retrieval = "retrieval.jsonl"
            [search]
            edge_threshold = 0.3
            [decoder]
            beam_width = 3
            [run]
            seed = 7
            stages = ["ingest", "search"]
        "#;
        let config: PipelineConfig = toml::from_str(raw).unwrap();
        assert_eq!(config.label, "demo");
        assert_eq!(config.search.edge_threshold, 0.3);
        assert_eq!(config.search.node_threshold, 0.90);
        assert_eq!(config.decoder.beam_width, 3);
        assert_eq!(config.decoder.max_chains(), 3);
        assert_eq!(config.run.seed, 7);
        config.validate().unwrap();
    }

    #[test]
    fn mock_override_replaces_remote_backends() {
        let mut config = PipelineConfig::default();
        config.embedding.backend = EmbeddingBackendKind::RemoteHttp;
        config.decoder.scorer = ScorerKind::Remote;
        config.qa.backend = QaBackendKind::Remote;
        config.force_mock_backends();
        assert_eq!(config.embedding.backend, EmbeddingBackendKind::DeterministicLocal);
        assert_eq!(config.decoder.scorer, ScorerKind::Stub);
        assert_eq!(config.qa.backend, QaBackendKind::Mock);
    }
}
