//! Run manifests: everything needed to re-run an invocation exactly —
//! configuration, asset versions, corpus hash — plus the measurement and
//! the list of files written.

use serde::{Deserialize, Serialize};

use footbench_core::meter::RunMeasurement;
use footbench_core::strategy::{KScore, StopReason, StrategyLabel};

use crate::config::RunConfig;

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub strategy: StrategyLabel,
    pub k_values: Vec<usize>,
    pub evaluated: Vec<KScore>,
    pub selected_k: usize,
    pub stop_reason: StopReason,
    pub trained_models: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub command: String,
    pub config: RunConfig,
    pub asset_versions: String,
    pub corpus_hash: String,
    pub run: RunSummary,
    pub files: Vec<String>,
    /// Wall-clock timings; the only part of a run's outputs that differs
    /// between repeated identical invocations.
    pub measurement: RunMeasurement,
    pub created_unix_ms: u64,
}

pub fn now_unix_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub fn write_manifest(path: &std::path::Path, manifest: &RunManifest) -> std::io::Result<()> {
    std::fs::write(
        path,
        serde_json::to_string_pretty(manifest).expect("manifest serializable"),
    )
}
