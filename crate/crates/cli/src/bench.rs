//! The `bench` command: a blocked paired comparison of one strategy against
//! the freshly re-run naive baseline, followed by paired inference, savings
//! summaries and an output-equivalence check at the common selected K.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use footbench_core::align::{alignment_report, AlignmentReport};
use footbench_core::corpus::{load_csv, CsvSchema};
use footbench_core::experiment::{
    deltas, run_block, savings_summary, PairedBlock, SavingsSummary,
};
use footbench_core::report::{savings_markdown, SavingsRow};
use footbench_core::stats::{
    bootstrap_ci, paired_t, sign_test, BootstrapCI, BootstrapStatistic, DeltaSeries, Metric,
    SignTestResult, TTestResult,
};
use footbench_core::strategy::{naive_plan, write_workflow_outputs, StrategyLabel};

use crate::config::RunConfig;
use crate::manifest::now_unix_ms;
use crate::workflow::plan_from_config;
use crate::CliError;

/// Inference over one metric's delta series. Fields stay empty when the
/// block is too small for the corresponding procedure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricInference {
    pub deltas: Vec<f64>,
    pub t_test: Option<TTestResult>,
    pub bootstrap_mean: Option<BootstrapCI>,
    pub bootstrap_median: Option<BootstrapCI>,
    pub sign_test: Option<SignTestResult>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignmentSection {
    pub common_k: usize,
    pub mean_matched_jaccard: f64,
    pub doc_topic_files_identical: bool,
    pub report: AlignmentReport,
}

/// The block run record written to `<strategy>_<timestamp>_block.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockRecord {
    pub config: RunConfig,
    pub environment_note: String,
    pub block: PairedBlock,
    pub runtime: MetricInference,
    pub emissions: MetricInference,
    pub savings: SavingsSummary,
    pub alignment: AlignmentSection,
    pub created_unix_ms: u64,
}

fn inference_for(series: &DeltaSeries, config: &RunConfig) -> MetricInference {
    let n = series.len();
    if n < 2 {
        return MetricInference {
            deltas: series.values.clone(),
            t_test: None,
            bootstrap_mean: None,
            bootstrap_median: None,
            sign_test: sign_test(series).ok(),
            note: Some(format!("inference unavailable: n = {n} < 2")),
        };
    }
    MetricInference {
        deltas: series.values.clone(),
        t_test: paired_t(series).ok(),
        bootstrap_mean: bootstrap_ci(
            series,
            BootstrapStatistic::Mean,
            config.bootstrap_b,
            0.95,
            config.seed,
        )
        .ok(),
        bootstrap_median: bootstrap_ci(
            series,
            BootstrapStatistic::Median,
            config.bootstrap_b,
            0.95,
            config.seed,
        )
        .ok(),
        sign_test: sign_test(series).ok(),
        note: None,
    }
}

/// Guard holding the output-dir lock; removes the lock file on drop.
struct DirLock {
    path: PathBuf,
}

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("bench.lock");
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(DirLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(CliError::OutputDirLocked(path.display().to_string()))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

pub struct BenchArtifacts {
    pub record: BlockRecord,
    pub block_path: PathBuf,
    pub out_dir: PathBuf,
}

/// Run the blocked paired comparison and write the block record, summary
/// tables, alignment report and the final pair's full outputs.
pub fn cmd_bench(config: &RunConfig) -> Result<BenchArtifacts, CliError> {
    if config.strategy == StrategyLabel::Naive {
        eprintln!("note: benchmarking naive against itself; deltas should center on zero");
    }
    let out_dir = Path::new(&config.output_dir).join(format!("{}_bench", config.run_id()));
    let _lock = DirLock::acquire(&out_dir)?;

    let report = load_csv(Path::new(&config.csv_path), &CsvSchema::default())?;
    let plan = plan_from_config(config);
    let baseline_plan = naive_plan().with_k_range(config.k_min, config.k_max);
    let pre_config = config.preprocess_config();
    let opts = config.execute_options();

    let outcome = run_block(
        &plan,
        &baseline_plan,
        config.pairs,
        &report.records,
        &pre_config,
        &opts,
        &config.meter_config(),
        Some(&out_dir.join("pairs")),
    )?;

    let runtime_deltas = deltas(&outcome.block, Metric::RuntimeSeconds);
    let emissions_deltas = deltas(&outcome.block, Metric::EmissionsGrams);
    let runtime = inference_for(&runtime_deltas, config);
    let emissions = inference_for(&emissions_deltas, config);
    let savings = savings_summary(&outcome.block)?;

    // Output equivalence at the common K: the strategy's selected K, which
    // the exhaustive baseline necessarily evaluated.
    let common_k = outcome.final_strategy.selected_k;
    let model_a = outcome
        .final_baseline
        .models
        .get(&common_k)
        .ok_or_else(|| CliError::Invalid(format!("baseline did not evaluate K={common_k}")))?;
    let model_b = &outcome.final_strategy.models[&common_k];
    let align = alignment_report(model_a, model_b, config.top_n_words)?;

    // Export both final runs and byte-compare the doc-topic matrices.
    let corpus = footbench_core::corpus::build_corpus(&report.records, &pre_config)?;
    let base_dir = out_dir.join("final_baseline");
    let strat_dir = out_dir.join("final_strategy");
    write_workflow_outputs(&outcome.final_baseline, &corpus, &base_dir, config.cooccur_threshold)?;
    write_workflow_outputs(&outcome.final_strategy, &corpus, &strat_dir, config.cooccur_threshold)?;
    let doc_topic_name = format!("doc_topic_k{common_k}.csv");
    let doc_topic_files_identical = std::fs::read(base_dir.join(&doc_topic_name))?
        == std::fs::read(strat_dir.join(&doc_topic_name))?;

    let record = BlockRecord {
        config: config.clone(),
        environment_note: config.environment_note.clone(),
        block: outcome.block,
        runtime,
        emissions,
        savings,
        alignment: AlignmentSection {
            common_k,
            mean_matched_jaccard: align.mean_matched,
            doc_topic_files_identical,
            report: align,
        },
        created_unix_ms: now_unix_ms(),
    };

    let block_path = out_dir.join(format!(
        "{}_{}_block.json",
        config.strategy.as_str(),
        record.created_unix_ms
    ));
    std::fs::write(
        &block_path,
        serde_json::to_string_pretty(&record).expect("serializable"),
    )?;

    let summary_md = savings_markdown(
        &[SavingsRow {
            strategy: config.strategy.as_str().into(),
            absolute: record.savings.runtime.absolute_mean,
            relative_pct: record.savings.runtime.relative_pct,
        }],
        &[SavingsRow {
            strategy: config.strategy.as_str().into(),
            absolute: record.savings.emissions.absolute_mean,
            relative_pct: record.savings.emissions.relative_pct,
        }],
    );
    std::fs::write(out_dir.join("savings_summary.md"), summary_md)?;
    std::fs::write(
        out_dir.join("alignment.csv"),
        format!(
            "comparison,common_k,mean_matched_jaccard\n{}_vs_naive,{},{:.3}\n",
            config.strategy.as_str(),
            common_k,
            record.alignment.mean_matched_jaccard
        ),
    )?;

    print_block_summary(&record);
    Ok(BenchArtifacts {
        record,
        block_path,
        out_dir,
    })
}

fn print_block_summary(record: &BlockRecord) {
    println!(
        "block: {} vs naive, n={} pairs",
        record.config.strategy.as_str(),
        record.block.n
    );
    println!(
        "runtime savings: {:.2} s ({:.2} %)",
        record.savings.runtime.absolute_mean, record.savings.runtime.relative_pct
    );
    println!(
        "emissions savings: {:.3} g ({:.2} %)",
        record.savings.emissions.absolute_mean, record.savings.emissions.relative_pct
    );
    match (&record.runtime.t_test, &record.runtime.note) {
        (Some(t), _) => println!(
            "runtime t-test: t = {:.2}, df = {}, p = {:.4}",
            t.t, t.df, t.p_two_sided
        ),
        (None, Some(note)) => println!("runtime t-test: {note}"),
        _ => {}
    }
    println!(
        "alignment at K={}: mean matched Jaccard {:.3}, doc-topic files identical: {}",
        record.alignment.common_k,
        record.alignment.mean_matched_jaccard,
        record.alignment.doc_topic_files_identical
    );
}
