//! The smaller commands: ingest, stats, align, report, synth.

use std::path::Path;

use serde::Serialize;

use footbench_core::align::alignment_report;
use footbench_core::corpus::{
    self, build_corpus, generate_synthetic, load_csv, CsvSchema, PreprocessConfig, Preprocessor,
};
use footbench_core::diagnostics::{self, umass_coherence};
use footbench_core::lda::TopicModel;
use footbench_core::report::{
    cooccurrence, doc_topic_csv, evolution_table, prevalence_rows, top_documents, topics_csv,
    Exportable, PrevalenceTable,
};
use footbench_core::rng::{self, SALT_SYNTH};
use footbench_core::stats::{
    bootstrap_ci, paired_t, sign_test, BootstrapStatistic, DeltaSeries, Metric,
};

use crate::CliError;

const SYNTH_WORDS: &str = include_str!("../assets/synth_words_v1.txt");

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct IngestSummary {
    pub records: usize,
    pub dropped_placeholder: usize,
    pub dropped_short: usize,
    pub documents: usize,
    pub vocabulary: usize,
    pub total_tokens: usize,
    pub with_year: usize,
    pub corpus_hash: String,
    pub asset_versions: String,
}

pub fn cmd_ingest(
    csv_path: &Path,
    min_tokens: usize,
    out: Option<&Path>,
) -> Result<IngestSummary, CliError> {
    let report = load_csv(csv_path, &CsvSchema::default())?;
    let config = PreprocessConfig {
        min_tokens,
        ..PreprocessConfig::default()
    };
    let corpus = build_corpus(&report.records, &config)?;
    let summary = IngestSummary {
        records: report.records.len() + report.dropped,
        dropped_placeholder: report.dropped,
        dropped_short: corpus.dropped_short,
        documents: corpus.docs.len(),
        vocabulary: corpus.vocab.len(),
        total_tokens: corpus.total_tokens(),
        with_year: corpus.docs.iter().filter(|d| d.year.is_some()).count(),
        corpus_hash: corpus.content_hash(),
        asset_versions: corpus.asset_versions.clone(),
    };
    println!(
        "records {} (dropped {} placeholder, {} short), documents {}, vocabulary {}, tokens {}, with year {}",
        summary.records,
        summary.dropped_placeholder,
        summary.dropped_short,
        summary.documents,
        summary.vocabulary,
        summary.total_tokens,
        summary.with_year
    );
    println!("corpus hash {}", summary.corpus_hash);
    if let Some(path) = out {
        std::fs::write(path, serde_json::to_string_pretty(&summary).expect("serializable"))?;
    }
    Ok(summary)
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

pub fn cmd_stats(
    delta_csv: &Path,
    column: &str,
    metric: Metric,
    bootstrap_b: usize,
    level: f64,
    seed: u64,
) -> Result<(), CliError> {
    let file = std::fs::File::open(delta_csv)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Invalid(e.to_string()))?
        .clone();
    let idx = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| CliError::Invalid(format!("column '{column}' not found")))?;
    let mut values = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| CliError::Invalid(e.to_string()))?;
        let raw = row.get(idx).unwrap_or("").trim();
        let value: f64 = raw.parse().map_err(|_| {
            CliError::Invalid(format!("non-numeric value '{raw}' in row {}", i + 2))
        })?;
        values.push(value);
    }
    if values.is_empty() {
        return Err(CliError::Invalid("no delta rows found".into()));
    }
    let deltas = DeltaSeries::new(metric, values);

    match paired_t(&deltas) {
        Ok(t) => {
            let marker = if t.degenerate { " (degenerate: sd = 0)" } else { "" };
            println!(
                "paired t-test: mean {:.4}, sd {:.4}, n {}, t = {:.2}, df = {}, p = {:.4}{marker}",
                t.mean, t.sd, t.n, t.t, t.df, t.p_two_sided
            );
        }
        Err(e) => println!("paired t-test unavailable: {e}"),
    }
    for stat in [BootstrapStatistic::Mean, BootstrapStatistic::Median] {
        match bootstrap_ci(&deltas, stat, bootstrap_b, level, seed) {
            Ok(ci) => println!(
                "bootstrap {} CI{:.0}: [{:.4}, {:.4}] (B = {}, seed {})",
                stat.as_str(),
                100.0 * level,
                ci.low,
                ci.high,
                ci.b,
                ci.seed
            ),
            Err(e) => println!("bootstrap {} unavailable: {e}", stat.as_str()),
        }
    }
    let s = sign_test(&deltas)?;
    let marker = if s.degenerate { " (degenerate: all zeros)" } else { "" };
    println!(
        "sign test: {}/{} positive, p = {:.4}{marker}",
        s.positives, s.n_nonzero, s.p_two_sided
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// align
// ---------------------------------------------------------------------------

pub fn cmd_align(
    model_a: &Path,
    model_b: &Path,
    top_n: usize,
    out: Option<&Path>,
    csv_out: Option<&Path>,
) -> Result<f64, CliError> {
    let a = TopicModel::load(model_a)?;
    let b = TopicModel::load(model_b)?;
    let report = alignment_report(&a, &b, top_n)?;
    println!(
        "K = {}, mean matched Jaccard = {:.3}",
        report.k, report.mean_matched
    );
    for (i, (&j, &sim)) in report
        .permutation
        .iter()
        .zip(&report.per_topic)
        .enumerate()
    {
        println!("  topic {i} -> {j}: {sim:.3}");
    }
    if let Some(path) = out {
        std::fs::write(path, serde_json::to_string_pretty(&report).expect("serializable"))?;
    }
    if let Some(path) = csv_out {
        std::fs::write(
            path,
            format!(
                "comparison,common_k,mean_matched_jaccard\n{}_vs_{},{},{:.3}\n",
                model_a.file_stem().unwrap_or_default().to_string_lossy(),
                model_b.file_stem().unwrap_or_default().to_string_lossy(),
                report.k,
                report.mean_matched
            ),
        )?;
    }
    Ok(report.mean_matched)
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
pub fn cmd_report(
    csv_path: &Path,
    model_path: &Path,
    out_dir: &Path,
    min_tokens: usize,
    top_n: usize,
    top_docs: usize,
    cooccur_threshold: f64,
) -> Result<(), CliError> {
    let loaded = load_csv(csv_path, &CsvSchema::default())?;
    let config = PreprocessConfig {
        min_tokens,
        ..PreprocessConfig::default()
    };
    let corpus = build_corpus(&loaded.records, &config)?;
    let model = TopicModel::load(model_path)?;
    if model.vocab_version != corpus.vocab.version() {
        return Err(CliError::Invalid(format!(
            "model was fitted on vocabulary '{}' but the corpus builds '{}'",
            model.vocab_version,
            corpus.vocab.version()
        )));
    }

    std::fs::create_dir_all(out_dir)?;
    std::fs::write(
        out_dir.join("topics.csv"),
        topics_csv(&model, &corpus.vocab, top_n)?,
    )?;
    std::fs::write(
        out_dir.join("doc_topic.csv"),
        doc_topic_csv(&model, &corpus.docs)?,
    )?;
    std::fs::write(
        out_dir.join("evolution.csv"),
        evolution_table(&model, &corpus.docs)?.to_csv(),
    )?;
    std::fs::write(
        out_dir.join("cooccurrence.csv"),
        cooccurrence(&model, cooccur_threshold)?.to_csv(),
    )?;
    std::fs::write(
        out_dir.join("top_docs.csv"),
        top_documents(&model, &corpus.docs, top_docs)?.to_csv(),
    )?;
    let shares = diagnostics::token_share(&model, &corpus.bows)?;
    std::fs::write(
        out_dir.join("prevalence.csv"),
        PrevalenceTable(prevalence_rows(&shares)).to_csv(),
    )?;
    let coherence = umass_coherence(&model, &corpus.vocab, top_n, diagnostics::DEFAULT_EPSILON)?;
    let perplexity = diagnostics::perplexity(&model, &corpus.bows)?;
    let mut diag = Vec::new();
    diagnostics::export_csv(
        &[diagnostics::DiagnosticsRow {
            k: model.k(),
            coherence_mean: coherence.mean,
            perplexity,
        }],
        &mut diag,
    )?;
    std::fs::write(out_dir.join("diagnostics.csv"), diag)?;

    #[derive(Serialize)]
    struct ReportManifest<'a> {
        command: &'a str,
        csv_path: String,
        model_path: String,
        min_tokens: usize,
        top_n_words: usize,
        top_docs: usize,
        cooccur_threshold: f64,
        corpus_hash: String,
        asset_versions: &'a str,
        vocab_version: &'a str,
    }
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&ReportManifest {
            command: "report",
            csv_path: csv_path.display().to_string(),
            model_path: model_path.display().to_string(),
            min_tokens,
            top_n_words: top_n,
            top_docs,
            cooccur_threshold,
            corpus_hash: corpus.content_hash(),
            asset_versions: &corpus.asset_versions,
            vocab_version: &model.vocab_version,
        })
        .expect("serializable"),
    )?;
    println!(
        "wrote report artifacts for K={} to {}",
        model.k(),
        out_dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
pub fn cmd_synth(
    out: &Path,
    docs: usize,
    topics: usize,
    vocab: usize,
    doc_len: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    year_range: (i32, i32),
    plain_tokens: bool,
) -> Result<(), CliError> {
    let (tokenized, _planted) =
        generate_synthetic(topics, vocab, docs, doc_len, alpha, beta, seed)?;

    // Map placeholder tokens onto the bundled word list unless asked for the
    // raw letter codes. Every word must pass through preprocessing
    // unchanged, otherwise the written corpus would not rebuild itself.
    let words: Vec<String> = if plain_tokens {
        (0..vocab).map(corpus::synthetic_word).collect()
    } else {
        let bundled: Vec<&str> = SYNTH_WORDS.lines().filter(|l| !l.trim().is_empty()).collect();
        if vocab > bundled.len() {
            return Err(CliError::Invalid(format!(
                "vocab {} exceeds the {} bundled words; use --plain-tokens",
                vocab,
                bundled.len()
            )));
        }
        let pp_config = PreprocessConfig::default();
        let pp = Preprocessor::new(&pp_config)?;
        for w in bundled.iter().take(vocab) {
            let round = pp.run(w);
            if round.len() != 1 || round[0] != *w {
                return Err(CliError::Invalid(format!(
                    "bundled word '{w}' does not survive preprocessing"
                )));
            }
        }
        bundled.iter().take(vocab).map(|w| w.to_string()).collect()
    };
    let id_of: std::collections::HashMap<String, usize> = (0..vocab)
        .map(|v| (corpus::synthetic_word(v), v))
        .collect();

    let (y_min, y_max) = year_range;
    let mut wtr = csv::Writer::from_path(out).map_err(|e| CliError::Invalid(e.to_string()))?;
    wtr.write_record(["title", "abstract", "year"])
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    for doc in &tokenized {
        let mapped: Vec<&str> = doc
            .tokens
            .iter()
            .map(|t| words[id_of[t]].as_str())
            .collect();
        let abstract_text = mapped.join(" ");
        let title = mapped.iter().take(3).cloned().collect::<Vec<_>>().join(" ");
        // Years ramp upward across the range, denser in recent years.
        let year = {
            let span = (y_max - y_min + 1) as u64;
            let mut stream = rng::substream(seed, SALT_SYNTH, 0x2000_0000 + doc.doc_id as u64);
            let u = rng::unit_f64(&mut stream).sqrt();
            y_min + ((u * span as f64) as i64).min(span as i64 - 1) as i32
        };
        wtr.write_record([title.as_str(), abstract_text.as_str(), &year.to_string()])
            .map_err(|e| CliError::Invalid(e.to_string()))?;
    }
    wtr.flush()?;
    println!(
        "wrote {docs} synthetic documents (K={topics}, V={vocab}, seed {seed}) to {}",
        out.display()
    );
    Ok(())
}
