use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use footbench_cli::config::RunConfig;
use footbench_cli::{bench, tools, workflow};
use footbench_core::stats::Metric;
use footbench_core::strategy::StrategyLabel;

#[derive(Parser)]
#[command(
    name = "footbench",
    version,
    about = "Benchmark the runtime and CO2e footprint of decision-equivalent topic-model survey workflows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by `workflow` and `bench`, mirroring the run configuration.
#[derive(Args, Clone)]
struct RunArgs {
    /// Input corpus CSV with columns title, abstract, year.
    #[arg(long)]
    csv: PathBuf,
    /// Directory for run outputs.
    #[arg(long, default_value = "outputs")]
    output_dir: PathBuf,
    /// Decision policy to execute.
    #[arg(long, value_parser = parse_strategy, default_value = "naive")]
    strategy: StrategyLabel,
    /// Paired repetitions per block (bench only).
    #[arg(long, default_value_t = 5)]
    pairs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    k_min: usize,
    #[arg(long, default_value_t = 15)]
    k_max: usize,
    /// Document-topic concentration; defaults to 1/k.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    /// Full-corpus passes per model.
    #[arg(long, default_value_t = 10)]
    sweeps: u32,
    /// Per-document iterations for held-out inference.
    #[arg(long, default_value_t = 200)]
    iterations: u32,
    /// Assumed average power draw in watts.
    #[arg(long, env = "POWER_WATTS", default_value_t = 45.0)]
    power_watts: f64,
    /// Grid carbon intensity in grams CO2e per kWh.
    #[arg(long, env = "CARBON_INTENSITY_G_KWH", default_value_t = 400.0)]
    carbon_intensity: f64,
    #[arg(long, default_value_t = 20_000)]
    bootstrap_b: usize,
    #[arg(long, default_value_t = 10)]
    top_n_words: usize,
    #[arg(long, default_value_t = 0.10)]
    cooccur_threshold: f64,
    /// Minimum tokens for a document to be retained.
    #[arg(long, default_value_t = 5)]
    min_tokens: usize,
    /// Free-text note about the execution environment, recorded in outputs.
    #[arg(long, default_value = "")]
    environment_note: String,
}

fn parse_strategy(s: &str) -> Result<StrategyLabel, String> {
    s.parse()
}

impl RunArgs {
    fn into_config(self) -> RunConfig {
        RunConfig {
            csv_path: self.csv.display().to_string(),
            output_dir: self.output_dir.display().to_string(),
            strategy: self.strategy,
            pairs: self.pairs,
            seed: self.seed,
            k_min: self.k_min,
            k_max: self.k_max,
            alpha: self.alpha,
            beta: self.beta,
            sweeps: self.sweeps,
            iterations: self.iterations,
            power_watts: self.power_watts,
            carbon_intensity: self.carbon_intensity,
            bootstrap_b: self.bootstrap_b,
            top_n_words: self.top_n_words,
            cooccur_threshold: self.cooccur_threshold,
            min_tokens: self.min_tokens,
            environment_note: self.environment_note,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the corpus from a CSV and print ingestion statistics.
    Ingest {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value_t = 5)]
        min_tokens: usize,
        /// Write the summary as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute one strategy workflow and write its outputs and manifest.
    Workflow {
        #[command(flatten)]
        run: Box<RunArgs>,
        /// Override the config-derived run id.
        #[arg(long)]
        run_id: Option<String>,
    },
    /// Run a blocked paired comparison against the naive baseline, with
    /// paired statistics and an output-equivalence check.
    Bench {
        #[command(flatten)]
        run: Box<RunArgs>,
    },
    /// Paired inference over a delta column from a CSV.
    Stats {
        #[arg(long)]
        delta_csv: PathBuf,
        #[arg(long, default_value = "delta")]
        column: String,
        /// Which outcome the deltas describe (runtime or emissions).
        #[arg(long, default_value = "runtime", value_parser = parse_metric)]
        metric: Metric,
        #[arg(long, default_value_t = 20_000)]
        bootstrap_b: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Compare two saved models at a common K via optimal topic matching.
    Align {
        #[arg(long)]
        model_a: PathBuf,
        #[arg(long)]
        model_b: PathBuf,
        #[arg(long, default_value_t = 10)]
        top_n_words: usize,
        /// Write the full alignment report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write a one-row CSV summary.
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// Produce survey artifacts for a saved model on its corpus.
    Report {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "report_out")]
        output_dir: PathBuf,
        #[arg(long, default_value_t = 5)]
        min_tokens: usize,
        #[arg(long, default_value_t = 10)]
        top_n_words: usize,
        #[arg(long, default_value_t = 10)]
        top_docs: usize,
        #[arg(long, default_value_t = 0.10)]
        cooccur_threshold: f64,
    },
    /// Generate a synthetic corpus CSV from the topic-model process.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        docs: usize,
        #[arg(long, default_value_t = 7)]
        topics: usize,
        #[arg(long, default_value_t = 140)]
        vocab: usize,
        #[arg(long, default_value_t = 60)]
        doc_len: usize,
        #[arg(long, default_value_t = 0.4)]
        alpha: f64,
        #[arg(long, default_value_t = 0.001)]
        beta: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 2016)]
        year_min: i32,
        #[arg(long, default_value_t = 2025)]
        year_max: i32,
        /// Emit raw letter-coded tokens instead of the bundled word list.
        #[arg(long)]
        plain_tokens: bool,
    },
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    match s {
        "runtime" | "runtime_seconds" => Ok(Metric::RuntimeSeconds),
        "emissions" | "emissions_g" => Ok(Metric::EmissionsGrams),
        other => Err(format!("unknown metric '{other}'")),
    }
}

fn run(cli: Cli) -> Result<(), footbench_cli::CliError> {
    match cli.command {
        Command::Ingest {
            csv,
            min_tokens,
            out,
        } => {
            tools::cmd_ingest(&csv, min_tokens, out.as_deref())?;
        }
        Command::Workflow { run, run_id } => {
            workflow::cmd_workflow(&run.into_config(), run_id.as_deref())?;
        }
        Command::Bench { run } => {
            bench::cmd_bench(&run.into_config())?;
        }
        Command::Stats {
            delta_csv,
            column,
            metric,
            bootstrap_b,
            level,
            seed,
        } => {
            tools::cmd_stats(&delta_csv, &column, metric, bootstrap_b, level, seed)?;
        }
        Command::Align {
            model_a,
            model_b,
            top_n_words,
            out,
            csv_out,
        } => {
            tools::cmd_align(
                &model_a,
                &model_b,
                top_n_words,
                out.as_deref(),
                csv_out.as_deref(),
            )?;
        }
        Command::Report {
            csv,
            model,
            output_dir,
            min_tokens,
            top_n_words,
            top_docs,
            cooccur_threshold,
        } => {
            tools::cmd_report(
                &csv,
                &model,
                &output_dir,
                min_tokens,
                top_n_words,
                top_docs,
                cooccur_threshold,
            )?;
        }
        Command::Synth {
            out,
            docs,
            topics,
            vocab,
            doc_len,
            alpha,
            beta,
            seed,
            year_min,
            year_max,
            plain_tokens,
        } => {
            tools::cmd_synth(
                &out,
                docs,
                topics,
                vocab,
                doc_len,
                alpha,
                beta,
                seed,
                (year_min, year_max),
                plain_tokens,
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
