//! Pipeline orchestration for evidence-chain retrieval refinement: config
//! handling, prompt assembly, answer backends, stage running, and the
//! synthetic fixture generator. The `chainsift` binary is a thin wrapper
//! over [`pipeline::Pipeline`].

pub mod config;
pub mod fixture;
pub mod pipeline;
pub mod prompt;
pub mod qa;
