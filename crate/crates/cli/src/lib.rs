//! Library surface of the `footbench` CLI: command implementations are
//! exposed as functions so integration tests drive them directly.

pub mod bench;
pub mod config;
pub mod manifest;
pub mod tools;
pub mod workflow;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Corpus(#[from] footbench_core::corpus::CorpusError),
    #[error(transparent)]
    Lda(#[from] footbench_core::lda::LdaError),
    #[error(transparent)]
    Diagnostics(#[from] footbench_core::diagnostics::DiagnosticsError),
    #[error(transparent)]
    Workflow(#[from] footbench_core::strategy::WorkflowError),
    #[error(transparent)]
    Experiment(#[from] footbench_core::experiment::ExperimentError),
    #[error(transparent)]
    Stats(#[from] footbench_core::stats::StatsError),
    #[error(transparent)]
    Align(#[from] footbench_core::align::AlignError),
    #[error(transparent)]
    Report(#[from] footbench_core::report::ReportError),
    #[error("another bench run holds the output-dir lock at {0}; remove it if stale")]
    OutputDirLocked(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
