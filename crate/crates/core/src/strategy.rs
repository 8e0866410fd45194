//! Decision policies over the topic-count search and their execution.
//!
//! A [`StrategyPlan`] fixes three things: which K values are visited (search
//! scope), when the visit stops (stopping rule), and which post-estimation
//! outputs are produced (output scope). Executing a plan trains one model
//! per visited K, scores it by mean coherence, applies the stopping rule,
//! selects the best K, and produces outputs — all under one metering
//! context, so runtime and emissions differences between plans reflect the
//! computation the plan actually requested.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, BuiltCorpus, CorpusError, PreprocessConfig, RawRecord};
use crate::diagnostics::{self, DiagnosticsError, DEFAULT_EPSILON, DEFAULT_TOP_N};
use crate::lda::{self, LdaError, LdaHyperparams, TopicModel};
use crate::meter::{Meter, MeterConfig, MeterError, RunMeasurement};
use crate::report::{self, EvolutionTable, ReportError, TopDocuments};

/// Default K grid bounds.
pub const DEFAULT_K_MIN: usize = 5;
pub const DEFAULT_K_MAX: usize = 15;
/// Coherence improvement below which an evaluation counts as stagnation.
pub const DEFAULT_MIN_IMPROVEMENT: f64 = 0.005;
/// Consecutive stagnant evaluations tolerated before stopping.
pub const DEFAULT_PATIENCE: u32 = 2;
/// Documents kept per topic under the selected-only output scope.
pub const DEFAULT_SELECTED_TOP_DOCS: usize = 3;
/// Documents kept per topic when every K produces full outputs.
pub const DEFAULT_FULL_TOP_DOCS: usize = 10;

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error("plan has no K values to evaluate")]
    EmptyKValues,
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Lda(#[from] LdaError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Meter(#[from] MeterError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyLabel {
    Naive,
    GreenSoft,
    Constraints,
    Decision,
}

impl StrategyLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyLabel::Naive => "naive",
            StrategyLabel::GreenSoft => "green_soft",
            StrategyLabel::Constraints => "constraints",
            StrategyLabel::Decision => "decision",
        }
    }
}

impl std::str::FromStr for StrategyLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive" => Ok(StrategyLabel::Naive),
            "soft" | "green_soft" => Ok(StrategyLabel::GreenSoft),
            "constraints" => Ok(StrategyLabel::Constraints),
            "decision" => Ok(StrategyLabel::Decision),
            other => Err(format!("unknown strategy '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StopRule {
    None,
    Early { min_improvement: f64, patience: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PostScope {
    /// Document-topic matrices, top-documents tables and evolution series
    /// for every evaluated K.
    PerKFull,
    /// Heavy outputs only for the selected K, with a capped top-documents
    /// table.
    SelectedOnly { top_docs: usize },
}

/// An executable decision policy: search scope, stopping rule, output scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyPlan {
    pub label: StrategyLabel,
    pub k_values: Vec<usize>,
    pub stop_rule: StopRule,
    pub post_scope: PostScope,
}

impl StrategyPlan {
    pub fn validate(&self) -> Result<(), WorkflowError> {
        if self.k_values.is_empty() {
            return Err(WorkflowError::EmptyKValues);
        }
        if !self.k_values.windows(2).all(|w| w[0] < w[1]) {
            return Err(WorkflowError::InvalidPlan(
                "k_values must be strictly increasing".into(),
            ));
        }
        if let StopRule::Early {
            min_improvement,
            patience,
        } = self.stop_rule
        {
            if !min_improvement.is_finite() || min_improvement <= 0.0 {
                return Err(WorkflowError::InvalidPlan(
                    "min_improvement must be > 0".into(),
                ));
            }
            if patience < 1 {
                return Err(WorkflowError::InvalidPlan("patience must be >= 1".into()));
            }
        }
        Ok(())
    }

    /// Rebuild the K grid for different bounds, keeping the plan's shape:
    /// dense grid for exhaustive plans, step-2 grid for coarse ones.
    pub fn with_k_range(mut self, k_min: usize, k_max: usize) -> Self {
        self.k_values = match self.label {
            StrategyLabel::Naive | StrategyLabel::GreenSoft => (k_min..=k_max).collect(),
            StrategyLabel::Constraints | StrategyLabel::Decision => {
                (k_min..=k_max).step_by(2).collect()
            }
        };
        self
    }
}

/// Exhaustive baseline: every K in [5, 15], no stopping, full outputs per K.
pub fn naive_plan() -> StrategyPlan {
    StrategyPlan {
        label: StrategyLabel::Naive,
        k_values: (DEFAULT_K_MIN..=DEFAULT_K_MAX).collect(),
        stop_rule: StopRule::None,
        post_scope: PostScope::PerKFull,
    }
}

/// Computationally identical to the naive plan; only the label differs.
/// Keeping the alias explicit lets the harness demonstrate, rather than
/// assume, that generic efficiency language changes nothing.
pub fn soft_plan() -> StrategyPlan {
    StrategyPlan {
        label: StrategyLabel::GreenSoft,
        ..naive_plan()
    }
}

/// Coarse grid 5, 7, 9, 11, 13, 15; no stopping; full outputs per K.
pub fn constraints_plan() -> StrategyPlan {
    StrategyPlan {
        label: StrategyLabel::Constraints,
        k_values: (DEFAULT_K_MIN..=DEFAULT_K_MAX).step_by(2).collect(),
        stop_rule: StopRule::None,
        post_scope: PostScope::PerKFull,
    }
}

/// Coarse grid with early stopping (improvement < 0.005 twice in a row) and
/// post-estimation for the selected model only, top 3 documents per topic.
pub fn decision_plan() -> StrategyPlan {
    StrategyPlan {
        label: StrategyLabel::Decision,
        k_values: (DEFAULT_K_MIN..=DEFAULT_K_MAX).step_by(2).collect(),
        stop_rule: StopRule::Early {
            min_improvement: DEFAULT_MIN_IMPROVEMENT,
            patience: DEFAULT_PATIENCE,
        },
        post_scope: PostScope::SelectedOnly {
            top_docs: DEFAULT_SELECTED_TOP_DOCS,
        },
    }
}

pub fn plan_for(label: StrategyLabel) -> StrategyPlan {
    match label {
        StrategyLabel::Naive => naive_plan(),
        StrategyLabel::GreenSoft => soft_plan(),
        StrategyLabel::Constraints => constraints_plan(),
        StrategyLabel::Decision => decision_plan(),
    }
}

// ---------------------------------------------------------------------------
// Stopping rule
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Strike-counting early stopper. The best coherence updates on any strict
/// improvement; the strike counter resets only on an improvement of at
/// least `min_improvement`, and the search stops after `patience`
/// consecutive strikes. The first observation never strikes.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    min_improvement: f64,
    patience: u32,
    best: Option<f64>,
    strikes: u32,
}

impl EarlyStopper {
    pub fn new(min_improvement: f64, patience: u32) -> Self {
        EarlyStopper {
            min_improvement,
            patience,
            best: None,
            strikes: 0,
        }
    }

    pub fn observe(&mut self, coherence: f64) -> StopDecision {
        let improved_enough = match self.best {
            None => true,
            Some(best) => coherence - best >= self.min_improvement,
        };
        match self.best {
            Some(best) if coherence <= best => {}
            _ => self.best = Some(coherence),
        }
        if improved_enough {
            self.strikes = 0;
            StopDecision::Continue
        } else {
            self.strikes += 1;
            if self.strikes >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Exhausted,
    EarlyStopped,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Exhausted => "exhausted",
            StopReason::EarlyStopped => "early_stopped",
        }
    }
}

/// Hyperparameters shared across the K scan; `k` is filled per evaluation.
/// `alpha = None` resolves to the symmetric default `1/k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperBase {
    pub alpha: Option<f64>,
    pub beta: f64,
    pub sweeps: u32,
    pub per_doc_iterations: u32,
    pub seed: u64,
}

impl Default for HyperBase {
    fn default() -> Self {
        HyperBase {
            alpha: None,
            beta: 0.01,
            sweeps: 10,
            per_doc_iterations: 200,
            seed: 42,
        }
    }
}

impl HyperBase {
    pub fn for_k(&self, k: usize) -> LdaHyperparams {
        let mut hyper = LdaHyperparams::new(k)
            .with_beta(self.beta)
            .with_seed(self.seed)
            .with_sweeps(self.sweeps);
        hyper.per_doc_iterations = self.per_doc_iterations;
        if let Some(alpha) = self.alpha {
            hyper.alpha = alpha;
        }
        hyper
    }
}

/// Knobs of a workflow execution beyond the plan itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecuteOptions {
    pub hyper: HyperBase,
    /// Top words per topic for coherence scoring and topic tables.
    pub top_n_words: usize,
    pub epsilon: f64,
    /// Top documents per topic under the full output scope.
    pub full_scope_top_docs: usize,
}

impl Default for ExecuteOptions {
    fn default() -> Self {
        ExecuteOptions {
            hyper: HyperBase::default(),
            top_n_words: DEFAULT_TOP_N,
            epsilon: DEFAULT_EPSILON,
            full_scope_top_docs: DEFAULT_FULL_TOP_DOCS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: usize,
    pub coherence: f64,
}

/// Post-estimation artifacts for one model.
#[derive(Debug, Clone)]
pub struct PostEstimation {
    pub k: usize,
    pub evolution: EvolutionTable,
    pub top_docs: TopDocuments,
}

/// Everything a workflow run produced.
#[derive(Debug, Clone)]
pub struct WorkflowResult {
    pub plan: StrategyPlan,
    pub evaluated: Vec<KScore>,
    pub selected_k: usize,
    pub stop_reason: StopReason,
    /// Retained models: every evaluated K under the full scope, only the
    /// selected K under the selected-only scope.
    pub models: BTreeMap<usize, TopicModel>,
    pub outputs: Vec<PostEstimation>,
    /// Number of models actually fitted; equals `evaluated.len()`.
    pub trained_models: usize,
    pub measurement: RunMeasurement,
    pub corpus_hash: String,
}

/// Compact description of a run, retained in block records for equivalence
/// checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkflowManifest {
    pub strategy: StrategyLabel,
    pub k_values: Vec<usize>,
    pub evaluated: Vec<KScore>,
    pub selected_k: usize,
    pub stop_reason: StopReason,
    pub trained_models: usize,
    pub corpus_hash: String,
    pub seed: u64,
}

impl WorkflowResult {
    pub fn manifest(&self) -> WorkflowManifest {
        WorkflowManifest {
            strategy: self.plan.label,
            k_values: self.plan.k_values.clone(),
            evaluated: self.evaluated.clone(),
            selected_k: self.selected_k,
            stop_reason: self.stop_reason,
            trained_models: self.trained_models,
            corpus_hash: self.corpus_hash.clone(),
            seed: self.seed(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.models
            .values()
            .next()
            .map(|m| m.hyper.seed)
            .unwrap_or_default()
    }
}

/// Execute a plan on a built corpus: train sequentially over the K grid,
/// score each model by mean coherence, apply the stopping rule, select the
/// coherence argmax (ties to the smallest K) and produce outputs per the
/// plan's scope. Every phase is metered on the supplied context, and the
/// returned measurement snapshot includes phases the caller has already
/// recorded (preprocessing, per the measurement boundary).
pub fn execute(
    plan: &StrategyPlan,
    corpus: &BuiltCorpus,
    opts: &ExecuteOptions,
    meter: &Meter,
) -> Result<WorkflowResult, WorkflowError> {
    plan.validate()?;

    let mut evaluated: Vec<KScore> = Vec::new();
    let mut states: BTreeMap<usize, lda::FitState> = BTreeMap::new();
    let mut stopper = match plan.stop_rule {
        StopRule::Early {
            min_improvement,
            patience,
        } => Some(EarlyStopper::new(min_improvement, patience)),
        StopRule::None => None,
    };
    let mut stop_reason = StopReason::Exhausted;

    for &k in &plan.k_values {
        let hyper = opts.hyper.for_k(k);
        let state = meter.measure(&format!("train_k{k}"), || {
            lda::fit(&corpus.bows, &corpus.vocab, &hyper)
        })??;
        let coherence = meter.measure(&format!("score_k{k}"), || {
            let phi = state.phi(hyper.beta);
            diagnostics::umass_from_phi(&phi, &corpus.vocab, opts.top_n_words, opts.epsilon)
                .map(|r| r.mean)
        })??;
        evaluated.push(KScore { k, coherence });
        states.insert(k, state);
        if let Some(stopper) = stopper.as_mut() {
            if stopper.observe(coherence) == StopDecision::Stop {
                stop_reason = StopReason::EarlyStopped;
                break;
            }
        }
    }

    // Argmax coherence; scanning in K order keeps ties at the smallest K.
    let selected_k = evaluated
        .iter()
        .fold(None::<KScore>, |best, &score| match best {
            Some(b) if score.coherence <= b.coherence => Some(b),
            _ => Some(score),
        })
        .map(|s| s.k)
        .expect("at least one K evaluated");

    let trained_models = evaluated.len();
    let (models, outputs) = meter.measure("post_estimation", || {
        build_outputs(plan, corpus, opts, states, selected_k)
    })??;

    Ok(WorkflowResult {
        plan: plan.clone(),
        evaluated,
        selected_k,
        stop_reason,
        models,
        outputs,
        trained_models,
        measurement: meter.snapshot(),
        corpus_hash: corpus.content_hash(),
    })
}

type ModelsAndOutputs = (BTreeMap<usize, TopicModel>, Vec<PostEstimation>);

fn build_outputs(
    plan: &StrategyPlan,
    corpus: &BuiltCorpus,
    opts: &ExecuteOptions,
    states: BTreeMap<usize, lda::FitState>,
    selected_k: usize,
) -> Result<ModelsAndOutputs, WorkflowError> {
    let mut models = BTreeMap::new();
    let mut outputs = Vec::new();
    match plan.post_scope {
        PostScope::PerKFull => {
            for (k, state) in states {
                let hyper = opts.hyper.for_k(k);
                let model = state.into_model(&hyper, corpus.vocab.version());
                let evolution = report::evolution_table(&model, &corpus.docs)?;
                let top_docs =
                    report::top_documents(&model, &corpus.docs, opts.full_scope_top_docs)?;
                outputs.push(PostEstimation {
                    k,
                    evolution,
                    top_docs,
                });
                models.insert(k, model);
            }
        }
        PostScope::SelectedOnly { top_docs } => {
            // Only the selected state ever materialises a document-topic
            // matrix; the rest are dropped with their counts.
            let state = states
                .into_iter()
                .find(|(k, _)| *k == selected_k)
                .map(|(_, s)| s)
                .expect("selected state present");
            let hyper = opts.hyper.for_k(selected_k);
            let model = state.into_model(&hyper, corpus.vocab.version());
            let evolution = report::evolution_table(&model, &corpus.docs)?;
            let top = report::top_documents(&model, &corpus.docs, top_docs)?;
            outputs.push(PostEstimation {
                k: selected_k,
                evolution,
                top_docs: top,
            });
            models.insert(selected_k, model);
        }
    }
    Ok((models, outputs))
}

/// Run one fully metered workflow from raw records: preprocessing is
/// re-executed inside the measurement boundary, then the plan executes on
/// the built corpus.
pub fn run_workflow(
    plan: &StrategyPlan,
    records: &[RawRecord],
    pre_config: &PreprocessConfig,
    opts: &ExecuteOptions,
    meter_config: MeterConfig,
) -> Result<(WorkflowResult, BuiltCorpus), WorkflowError> {
    let meter = Meter::new(meter_config)?;
    let corpus = meter.measure("preprocess", || corpus::build_corpus(records, pre_config))??;
    let result = execute(plan, &corpus, opts, &meter)?;
    Ok((result, corpus))
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

/// Write a run's analytical outputs under `dir` and return the file names.
///
/// Layout: `kselect.csv` plus, per retained K, `topics_k<K>.csv`,
/// `doc_topic_k<K>.csv`, `evolution_k<K>.csv` and `top_docs_k<K>.csv`; the
/// selected model additionally gets the unsuffixed `evolution.csv`,
/// `cooccurrence.csv` and `top_docs.csv`. The caller owns `manifest.json`.
pub fn write_workflow_outputs(
    result: &WorkflowResult,
    corpus: &BuiltCorpus,
    dir: &Path,
    cooccur_threshold: f64,
) -> Result<Vec<String>, WorkflowError> {
    std::fs::create_dir_all(dir).map_err(ReportError::Io)?;
    let mut files = Vec::new();
    let mut write = |name: &str, text: &str| -> Result<(), WorkflowError> {
        std::fs::write(dir.join(name), text).map_err(ReportError::Io)?;
        files.push(name.to_string());
        Ok(())
    };

    let mut kselect = String::from("k,coherence,stop_reason\n");
    for score in &result.evaluated {
        kselect.push_str(&format!(
            "{},{:.6},{}\n",
            score.k,
            score.coherence,
            result.stop_reason.as_str()
        ));
    }
    write("kselect.csv", &kselect)?;

    for (k, model) in &result.models {
        write(
            &format!("topics_k{k}.csv"),
            &report::topics_csv(model, &corpus.vocab, result.plan.top_n_words_hint())?,
        )?;
        write(
            &format!("doc_topic_k{k}.csv"),
            &report::doc_topic_csv(model, &corpus.docs)?,
        )?;
    }
    for post in &result.outputs {
        write(
            &format!("evolution_k{}.csv", post.k),
            &report::Exportable::to_csv(&post.evolution),
        )?;
        write(
            &format!("top_docs_k{}.csv", post.k),
            &report::Exportable::to_csv(&post.top_docs),
        )?;
    }

    let selected = &result.models[&result.selected_k];
    let selected_post = result
        .outputs
        .iter()
        .find(|p| p.k == result.selected_k)
        .expect("selected output present");
    write(
        "evolution.csv",
        &report::Exportable::to_csv(&selected_post.evolution),
    )?;
    write(
        "top_docs.csv",
        &report::Exportable::to_csv(&selected_post.top_docs),
    )?;
    let cooc = report::cooccurrence(selected, cooccur_threshold)?;
    write("cooccurrence.csv", &report::Exportable::to_csv(&cooc))?;

    Ok(files)
}

impl StrategyPlan {
    /// Width of exported topic tables; mirrors the coherence top-N.
    fn top_n_words_hint(&self) -> usize {
        DEFAULT_TOP_N
    }
}
