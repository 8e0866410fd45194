//! The `workflow` command: run one strategy end to end, write its outputs
//! and manifest.

use std::path::{Path, PathBuf};

use footbench_core::corpus::{load_csv, CsvSchema};
use footbench_core::strategy::{
    plan_for, run_workflow, write_workflow_outputs, StrategyPlan, WorkflowResult,
};

use crate::config::RunConfig;
use crate::manifest::{now_unix_ms, write_manifest, RunManifest, RunSummary, MANIFEST_FORMAT_VERSION};
use crate::CliError;

pub fn plan_from_config(config: &RunConfig) -> StrategyPlan {
    plan_for(config.strategy).with_k_range(config.k_min, config.k_max)
}

pub struct WorkflowArtifacts {
    pub result: WorkflowResult,
    pub out_dir: PathBuf,
}

/// Execute one metered workflow per the config and write all outputs under
/// `<output_dir>/<run_id>/`.
pub fn cmd_workflow(config: &RunConfig, run_id: Option<&str>) -> Result<WorkflowArtifacts, CliError> {
    let report = load_csv(Path::new(&config.csv_path), &CsvSchema::default())?;
    if report.dropped > 0 {
        eprintln!(
            "dropped {} records with missing or placeholder abstracts",
            report.dropped
        );
    }
    let plan = plan_from_config(config);
    let pre_config = config.preprocess_config();
    let opts = config.execute_options();
    let (result, corpus) = run_workflow(
        &plan,
        &report.records,
        &pre_config,
        &opts,
        config.meter_config(),
    )?;
    if let Some(model) = result.models.values().next() {
        if let Some(warning) = &model.training_meta.warning {
            eprintln!("warning: {warning}");
        }
    }

    let run_id = run_id.map(String::from).unwrap_or_else(|| config.run_id());
    let out_dir = Path::new(&config.output_dir).join(&run_id);
    let files = write_workflow_outputs(&result, &corpus, &out_dir, config.cooccur_threshold)?;

    let manifest = RunManifest {
        format_version: MANIFEST_FORMAT_VERSION,
        command: "workflow".into(),
        config: config.clone(),
        asset_versions: corpus.asset_versions.clone(),
        corpus_hash: result.corpus_hash.clone(),
        run: RunSummary {
            strategy: result.plan.label,
            k_values: result.plan.k_values.clone(),
            evaluated: result.evaluated.clone(),
            selected_k: result.selected_k,
            stop_reason: result.stop_reason,
            trained_models: result.trained_models,
        },
        files,
        measurement: result.measurement.clone(),
        created_unix_ms: now_unix_ms(),
    };
    write_manifest(&out_dir.join("manifest.json"), &manifest)?;

    println!(
        "{}: evaluated {} models, selected K={} ({}), total {:.2} s, {:.3} g CO2e -> {}",
        result.plan.label.as_str(),
        result.trained_models,
        result.selected_k,
        result.stop_reason.as_str(),
        result.measurement.total_seconds,
        result.measurement.emissions_g,
        out_dir.display()
    );
    Ok(WorkflowArtifacts { result, out_dir })
}
