use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};

use chainsift_cli::config::{parse_stage_list, PipelineConfig, Stage};
use chainsift_cli::pipeline::Pipeline;

#[derive(Parser)]
#[command(
    name = "chainsift",
    about = "Mine evidence chains from retrieved documents and refine the context set",
    version
)]
struct Cli {
    /// Pipeline configuration file.
    #[arg(long, global = true, default_value = "config.toml")]
    config: PathBuf,

    /// Override the run seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Comma-separated stage list for `run` (prefix of ingest, search,
    /// decode, refine, answer, evaluate, report; answer may be omitted).
    #[arg(long, global = true)]
    stages: Option<String>,

    /// Backend family: `mock` forces offline backends everywhere, `remote`
    /// uses the config as written.
    #[arg(long, global = true, value_parser = ["mock", "remote"])]
    backend: Option<String>,

    /// Strict matching mode: exact substrings, no provenance shortcut,
    /// forward-only graph edges.
    #[arg(long, global = true)]
    strict_paper: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate all input files.
    Ingest,
    /// Build per-query evidence graphs and search for candidate chains.
    Search,
    /// Constrained beam decoding of candidate chains.
    Decode,
    /// Filter retrieved documents using the decoded chains.
    Refine,
    /// Generate answers with the configured QA backend.
    Answer,
    /// Score answers and retrieval quality; write the report files.
    Evaluate,
    /// Run the configured stages in order.
    Run,
    /// Re-render report files from report.json and print the summary.
    Report,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();

    let mut config = PipelineConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.run.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.run.out_dir = out.clone();
    }
    if let Some(stages) = &cli.stages {
        config.run.stages = parse_stage_list(stages)?;
    }
    if cli.backend.as_deref() == Some("mock") {
        config.force_mock_backends();
    }
    if cli.strict_paper {
        config.force_strict_paper_mode();
    }

    let stages: Vec<Stage> = match cli.command {
        Command::Ingest => vec![Stage::Ingest],
        Command::Search => vec![Stage::Search],
        Command::Decode => vec![Stage::Decode],
        Command::Refine => vec![Stage::Refine],
        Command::Answer => vec![Stage::Answer],
        Command::Evaluate => vec![Stage::Evaluate],
        Command::Report => vec![Stage::Report],
        Command::Run => config.run.stages.clone(),
    };

    let pipeline = Pipeline::new(config)?;
    let outcome = pipeline.run_stages(&stages)?;

    if outcome.n_failed > 0 {
        log::warn!(
            "{} of {} queries failed ({:.1}%)",
            outcome.n_failed,
            outcome.n_queries,
            100.0 * outcome.failure_rate()
        );
    }
    if !outcome.within_bound() {
        bail!(
            "failure rate {:.3} exceeds the configured bound {:.3}",
            outcome.failure_rate(),
            outcome.max_failure_rate
        );
    }
    Ok(())
}
