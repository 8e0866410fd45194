//! Benchmarking harness for decision-equivalent topic-model survey
//! workflows: deterministic corpus preprocessing, seeded LDA estimation,
//! model-selection diagnostics, executable decision policies, runtime and
//! CO2e metering, blocked paired comparison with small-sample inference, and
//! output-equivalence checks via optimal topic matching.

pub mod align;
pub mod corpus;
pub mod diagnostics;
pub mod experiment;
pub mod lda;
pub mod meter;
pub mod report;
pub mod rng;
pub mod stats;
pub mod strategy;
