//! Survey artifacts derived from fitted models — prevalence tables,
//! dominant-topic time series, topic co-occurrence counts, top-documents
//! tables — and their deterministic CSV/JSON/markdown exports.
//!
//! Formatting is fixed so identical inputs produce byte-identical files:
//! three decimals for shares, Jaccard values and grams, two for seconds,
//! six for probabilities and coherence.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TokenizedDoc;
use crate::lda::{self, TopicModel};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("threshold must lie in [0, 1), got {0}")]
    InvalidThreshold(f64),
    #[error("model covers {model_docs} documents but corpus has {corpus_docs}")]
    MisalignedModel {
        model_docs: usize,
        corpus_docs: usize,
    },
    #[error(transparent)]
    Lda(#[from] lda::LdaError),
    #[error("write failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
    Markdown,
}

// ---------------------------------------------------------------------------
// Dominant-topic evolution
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvolutionRow {
    pub year: i32,
    pub topic: usize,
    pub count: usize,
}

/// Documents per (year, dominant topic). Documents without a year are
/// excluded and counted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvolutionTable {
    pub rows: Vec<EvolutionRow>,
    /// Documents with a known year.
    pub coverage: usize,
    /// Documents excluded for lacking a year.
    pub excluded: usize,
}

pub fn evolution_table(
    model: &TopicModel,
    docs: &[TokenizedDoc],
) -> Result<EvolutionTable, ReportError> {
    if model.n_docs() != docs.len() {
        return Err(ReportError::MisalignedModel {
            model_docs: model.n_docs(),
            corpus_docs: docs.len(),
        });
    }
    let mut counts: std::collections::BTreeMap<(i32, usize), usize> = std::collections::BTreeMap::new();
    let mut coverage = 0usize;
    let mut excluded = 0usize;
    for (d, doc) in docs.iter().enumerate() {
        match doc.year {
            Some(year) => {
                coverage += 1;
                let topic = lda::dominant_topic(model.theta.row(d))?;
                *counts.entry((year, topic)).or_insert(0) += 1;
            }
            None => excluded += 1,
        }
    }
    let rows = counts
        .into_iter()
        .map(|((year, topic), count)| EvolutionRow { year, topic, count })
        .collect();
    Ok(EvolutionTable {
        rows,
        coverage,
        excluded,
    })
}

// ---------------------------------------------------------------------------
// Topic co-occurrence
// ---------------------------------------------------------------------------

/// Symmetric counts of topic pairs receiving more than `threshold` weight
/// within the same document. Diagonal is zero by convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooccurrenceMatrix {
    pub k: usize,
    pub threshold: f64,
    cells: Vec<u64>,
}

impl CooccurrenceMatrix {
    pub fn at(&self, i: usize, j: usize) -> u64 {
        self.cells[i * self.k + j]
    }
}

/// Default inclusion threshold on theta entries (strict greater-than).
pub const DEFAULT_COOCCUR_THRESHOLD: f64 = 0.10;

pub fn cooccurrence(model: &TopicModel, threshold: f64) -> Result<CooccurrenceMatrix, ReportError> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(ReportError::InvalidThreshold(threshold));
    }
    let k = model.k();
    let mut cells = vec![0u64; k * k];
    for d in 0..model.n_docs() {
        let row = model.theta.row(d);
        let present: Vec<usize> = (0..k).filter(|&t| row[t] > threshold).collect();
        for (a, &i) in present.iter().enumerate() {
            for &j in present.iter().skip(a + 1) {
                cells[i * k + j] += 1;
                cells[j * k + i] += 1;
            }
        }
    }
    Ok(CooccurrenceMatrix {
        k,
        threshold,
        cells,
    })
}

// ---------------------------------------------------------------------------
// Top documents
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocScore {
    pub doc_id: usize,
    pub theta: f64,
}

/// Per-topic ranking of the documents with the highest topic share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopDocuments {
    pub m: usize,
    pub per_topic: Vec<Vec<DocScore>>,
}

/// The `m` documents with the highest theta per topic; ties broken by lower
/// doc id. Asking for more documents than exist returns them all.
pub fn top_documents(
    model: &TopicModel,
    docs: &[TokenizedDoc],
    m: usize,
) -> Result<TopDocuments, ReportError> {
    if model.n_docs() != docs.len() {
        return Err(ReportError::MisalignedModel {
            model_docs: model.n_docs(),
            corpus_docs: docs.len(),
        });
    }
    let k = model.k();
    let take = m.min(docs.len());
    let mut per_topic = Vec::with_capacity(k);
    for t in 0..k {
        let mut scored: Vec<DocScore> = docs
            .iter()
            .enumerate()
            .map(|(d, doc)| DocScore {
                doc_id: doc.doc_id,
                theta: model.theta.at(d, t),
            })
            .collect();
        scored.sort_by(|a, b| {
            b.theta
                .partial_cmp(&a.theta)
                .unwrap()
                .then(a.doc_id.cmp(&b.doc_id))
        });
        scored.truncate(take);
        per_topic.push(scored);
    }
    Ok(TopDocuments { m, per_topic })
}

// ---------------------------------------------------------------------------
// Prevalence
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceRow {
    pub topic: usize,
    pub label: String,
    pub share_pct: f64,
}

/// Prevalence table from token shares; labels default to `topic_<k>`.
pub fn prevalence_rows(shares: &[f64]) -> Vec<PrevalenceRow> {
    shares
        .iter()
        .enumerate()
        .map(|(t, &s)| PrevalenceRow {
            topic: t,
            label: format!("topic_{t}"),
            share_pct: 100.0 * s,
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Exports
// ---------------------------------------------------------------------------

/// Anything that renders into the three supported formats.
pub trait Exportable {
    fn to_csv(&self) -> String;
    fn to_json(&self) -> String;
    fn to_markdown(&self) -> String;
}

/// Write an artifact to `path` in the requested format.
pub fn export(artifact: &dyn Exportable, format: ExportFormat, path: &std::path::Path) -> Result<(), ReportError> {
    let text = match format {
        ExportFormat::Csv => artifact.to_csv(),
        ExportFormat::Json => artifact.to_json(),
        ExportFormat::Markdown => artifact.to_markdown(),
    };
    let mut file = std::fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}

impl Exportable for EvolutionTable {
    fn to_csv(&self) -> String {
        let mut out = String::from("year,topic,count\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.year, r.topic, r.count));
        }
        out
    }

    fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    fn to_markdown(&self) -> String {
        let mut out = String::from("| year | topic | count |\n|---|---|---|\n");
        for r in &self.rows {
            out.push_str(&format!("| {} | {} | {} |\n", r.year, r.topic, r.count));
        }
        out
    }
}

impl Exportable for CooccurrenceMatrix {
    fn to_csv(&self) -> String {
        let mut out = String::from("topic");
        for j in 0..self.k {
            out.push_str(&format!(",topic_{j}"));
        }
        out.push('\n');
        for i in 0..self.k {
            out.push_str(&format!("topic_{i}"));
            for j in 0..self.k {
                out.push_str(&format!(",{}", self.at(i, j)));
            }
            out.push('\n');
        }
        out
    }

    fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    fn to_markdown(&self) -> String {
        let mut out = String::from("| topic |");
        for j in 0..self.k {
            out.push_str(&format!(" {j} |"));
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(self.k));
        out.push('\n');
        for i in 0..self.k {
            out.push_str(&format!("| {i} |"));
            for j in 0..self.k {
                out.push_str(&format!(" {} |", self.at(i, j)));
            }
            out.push('\n');
        }
        out
    }
}

impl Exportable for TopDocuments {
    fn to_csv(&self) -> String {
        let mut out = String::from("topic,rank,doc_id,theta\n");
        for (t, scores) in self.per_topic.iter().enumerate() {
            for (rank, s) in scores.iter().enumerate() {
                out.push_str(&format!("{},{},{},{:.6}\n", t, rank + 1, s.doc_id, s.theta));
            }
        }
        out
    }

    fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    fn to_markdown(&self) -> String {
        let mut out = String::from("| topic | rank | doc_id | theta |\n|---|---|---|---|\n");
        for (t, scores) in self.per_topic.iter().enumerate() {
            for (rank, s) in scores.iter().enumerate() {
                out.push_str(&format!(
                    "| {} | {} | {} | {:.6} |\n",
                    t,
                    rank + 1,
                    s.doc_id,
                    s.theta
                ));
            }
        }
        out
    }
}

/// Newtype so a prevalence table can be exported.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrevalenceTable(pub Vec<PrevalenceRow>);

impl Exportable for PrevalenceTable {
    fn to_csv(&self) -> String {
        let mut out = String::from("topic,label,share_pct\n");
        for r in &self.0 {
            out.push_str(&format!("{},{},{:.3}\n", r.topic, r.label, r.share_pct));
        }
        out
    }

    fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    fn to_markdown(&self) -> String {
        let mut out = String::from("| Topic | Label | Share of tokens (%) |\n|---|---|---|\n");
        for r in &self.0 {
            out.push_str(&format!("| {} | {} | {:.3} |\n", r.topic, r.label, r.share_pct));
        }
        out
    }
}

/// One strategy's savings against its within-block baseline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavingsRow {
    pub strategy: String,
    pub absolute: f64,
    pub relative_pct: f64,
}

/// Two-panel markdown table of paired savings, runtime above emissions.
pub fn savings_markdown(runtime: &[SavingsRow], emissions: &[SavingsRow]) -> String {
    let mut out = String::new();
    out.push_str("**Runtime**\n\n");
    out.push_str("| Strategy | Absolute savings (s) | Relative (%) |\n|---|---|---|\n");
    for r in runtime {
        out.push_str(&format!(
            "| {} | {:.2} | {:.2} |\n",
            r.strategy, r.absolute, r.relative_pct
        ));
    }
    out.push_str("\n**Carbon emissions**\n\n");
    out.push_str("| Strategy | Absolute savings (g CO2e) | Relative (%) |\n|---|---|---|\n");
    for r in emissions {
        out.push_str(&format!(
            "| {} | {:.3} | {:.2} |\n",
            r.strategy, r.absolute, r.relative_pct
        ));
    }
    out
}

/// Per-topic top-words table (`topic,rank,token,probability`).
pub fn topics_csv(model: &TopicModel, vocab: &crate::corpus::Vocabulary, top_n: usize) -> Result<String, ReportError> {
    let mut out = String::from("topic,rank,token,probability\n");
    for t in 0..model.k() {
        for (rank, (token, p)) in model.top_words(vocab, t, top_n)?.iter().enumerate() {
            out.push_str(&format!("{},{},{},{:.6}\n", t, rank + 1, token, p));
        }
    }
    Ok(out)
}

/// Full document-topic matrix (`doc_id,topic_0,...`).
pub fn doc_topic_csv(model: &TopicModel, docs: &[TokenizedDoc]) -> Result<String, ReportError> {
    if model.n_docs() != docs.len() {
        return Err(ReportError::MisalignedModel {
            model_docs: model.n_docs(),
            corpus_docs: docs.len(),
        });
    }
    let k = model.k();
    let mut out = String::from("doc_id");
    for t in 0..k {
        out.push_str(&format!(",topic_{t}"));
    }
    out.push('\n');
    for (d, doc) in docs.iter().enumerate() {
        out.push_str(&doc.doc_id.to_string());
        for t in 0..k {
            out.push_str(&format!(",{:.6}", model.theta.at(d, t)));
        }
        out.push('\n');
        debug_assert_eq!(doc.doc_id, d);
    }
    Ok(out)
}
