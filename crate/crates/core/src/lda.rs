//! Seed-deterministic LDA estimation by collapsed Gibbs sampling.
//!
//! Inference runs a fixed number of full-corpus sweeps. Within a sweep every
//! document resamples its token assignments with the document-topic part
//! collapsed (counts plus `alpha`), against a topic-word conditional table
//! frozen at the sweep boundary; global counts are then rebuilt. Each
//! document draws from its own ChaCha8 substream keyed by the document's
//! content hash and the sweep number (see [`crate::rng`]), which makes the
//! fit a pure function of `(corpus, hyperparameters)`:
//!
//! - results are bit-identical whether documents are processed sequentially
//!   or in parallel under the `rayon` feature,
//! - topic-word estimates do not depend on document order, and
//! - duplicating every document leaves the topic-word matrix unchanged up to
//!   smoothing, because counts double exactly.
//!
//! The frozen conditional is `(1 - MIX) * n_kv / n_k + MIX / V` with a fixed
//! mixing floor, which keeps every topic reachable and is exactly invariant
//! under proportional count scaling. Final estimates are the usual smoothed
//! ratios `phi ∝ n_kv + beta`, `theta ∝ n_dk + alpha`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{BowDoc, Vocabulary};
use crate::rng::{self, SALT_FOLD_IN, SALT_INIT, SALT_SWEEP};

#[cfg(feature = "rayon")]
use rayon::prelude::*;

/// Fixed uniform mixing floor of the per-sweep conditional word distribution.
const COND_MIX: f64 = 0.01;

/// Supported model-file format version.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LdaError {
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("token id {id} out of range for vocabulary of size {vocab}")]
    TokenIdOutOfRange { id: u32, vocab: usize },
    #[error("topic index {topic} out of range for k={k}")]
    TopicIndexOutOfRange { topic: usize, k: usize },
    #[error("theta row contains non-finite entries")]
    NonFiniteTheta,
    #[error("unsupported model format version {0}")]
    UnsupportedFormat(u32),
    #[error("model i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("model (de)serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

/// LDA hyperparameters. `alpha = None` resolves to the symmetric default
/// `1/k`; `beta` defaults to 0.01.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaHyperparams {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub sweeps: u32,
    pub per_doc_iterations: u32,
    pub seed: u64,
}

impl LdaHyperparams {
    /// Defaults for a given topic count: `alpha = 1/k`, `beta = 0.01`,
    /// 10 sweeps, 200 per-document iterations, seed 42.
    pub fn new(k: usize) -> Self {
        LdaHyperparams {
            k,
            alpha: 1.0 / k.max(1) as f64,
            beta: 0.01,
            sweeps: 10,
            per_doc_iterations: 200,
            seed: 42,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_sweeps(mut self, sweeps: u32) -> Self {
        self.sweeps = sweeps;
        self
    }

    pub fn validate(&self) -> Result<(), LdaError> {
        if self.k < 1 {
            return Err(LdaError::InvalidHyperparams("k must be >= 1".into()));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(LdaError::InvalidHyperparams("alpha must be > 0".into()));
        }
        if !self.beta.is_finite() || self.beta <= 0.0 {
            return Err(LdaError::InvalidHyperparams("beta must be > 0".into()));
        }
        if self.sweeps < 1 {
            return Err(LdaError::InvalidHyperparams("sweeps must be >= 1".into()));
        }
        if self.per_doc_iterations < 1 {
            return Err(LdaError::InvalidHyperparams(
                "per_doc_iterations must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Dense row-major matrix used for `phi` (K x V) and `theta` (D x K).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub sweeps_run: u32,
    /// Corpus log-likelihood under the smoothed estimates after each sweep.
    pub log_likelihood: Vec<f64>,
    pub warning: Option<String>,
}

/// A fitted topic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub format_version: u32,
    /// K x V topic-word probabilities, rows sum to 1.
    pub phi: Matrix,
    /// D x K document-topic proportions, rows sum to 1.
    pub theta: Matrix,
    pub hyper: LdaHyperparams,
    pub vocab_version: String,
    pub training_meta: TrainingMeta,
}

impl TopicModel {
    pub fn k(&self) -> usize {
        self.phi.rows
    }

    pub fn vocab_size(&self) -> usize {
        self.phi.cols
    }

    pub fn n_docs(&self) -> usize {
        self.theta.rows
    }

    /// Top-`n` token ids of a topic by descending probability, ties broken
    /// by ascending token id.
    pub fn top_word_ids(&self, topic: usize, n: usize) -> Result<Vec<(u32, f64)>, LdaError> {
        if topic >= self.k() {
            return Err(LdaError::TopicIndexOutOfRange {
                topic,
                k: self.k(),
            });
        }
        let row = self.phi.row(topic);
        let mut idx: Vec<u32> = (0..row.len() as u32).collect();
        idx.sort_by(|&a, &b| {
            row[b as usize]
                .partial_cmp(&row[a as usize])
                .unwrap()
                .then(a.cmp(&b))
        });
        Ok(idx
            .into_iter()
            .take(n.min(row.len()))
            .map(|v| (v, row[v as usize]))
            .collect())
    }

    /// Top-`n` tokens of a topic with probabilities attached.
    pub fn top_words(
        &self,
        vocab: &Vocabulary,
        topic: usize,
        n: usize,
    ) -> Result<Vec<(String, f64)>, LdaError> {
        Ok(self
            .top_word_ids(topic, n)?
            .into_iter()
            .map(|(v, p)| (vocab.token(v).to_string(), p))
            .collect())
    }

    pub fn to_json_writer<W: std::io::Write>(&self, w: W) -> Result<(), LdaError> {
        serde_json::to_writer(w, self)?;
        Ok(())
    }

    pub fn from_json_reader<R: std::io::Read>(r: R) -> Result<Self, LdaError> {
        let model: TopicModel = serde_json::from_reader(r)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(LdaError::UnsupportedFormat(model.format_version));
        }
        Ok(model)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), LdaError> {
        let file = std::fs::File::create(path)?;
        self.to_json_writer(std::io::BufWriter::new(file))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, LdaError> {
        let file = std::fs::File::open(path)?;
        Self::from_json_reader(std::io::BufReader::new(file))
    }
}

/// Index of the largest entry; ties broken by lowest index. The argmax is
/// invariant under positive scaling of the row.
pub fn dominant_topic(theta_row: &[f64]) -> Result<usize, LdaError> {
    if theta_row.iter().any(|x| !x.is_finite()) {
        return Err(LdaError::NonFiniteTheta);
    }
    let mut best = 0usize;
    for (i, &x) in theta_row.iter().enumerate().skip(1) {
        if x > theta_row[best] {
            best = i;
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

/// Topic-word table stored word-major (`data[v * k + t]`) so the per-token
/// sampling loop reads contiguously.
pub(crate) struct TopicWordTable {
    pub k: usize,
    pub data: Vec<f64>,
}

impl TopicWordTable {
    #[inline]
    pub fn row(&self, v: u32) -> &[f64] {
        let base = v as usize * self.k;
        &self.data[base..base + self.k]
    }
}

struct DocState {
    tokens: Vec<u32>,
    z: Vec<u32>,
    n_dk: Vec<u32>,
    content_hash: u64,
}

/// Mutable sampler state; topic-word estimates can be extracted without
/// materialising any document-topic matrix.
pub(crate) struct FitState {
    k: usize,
    v: usize,
    docs: Vec<DocState>,
    n_kv: Vec<u64>,
    n_k: Vec<u64>,
    loglik: Vec<f64>,
    warning: Option<String>,
}

impl FitState {
    /// Smoothed topic-word distribution, word-major.
    pub fn topic_word_table(&self, beta: f64) -> TopicWordTable {
        let (k, v) = (self.k, self.v);
        let mut data = vec![0.0; k * v];
        for t in 0..k {
            let denom = self.n_k[t] as f64 + v as f64 * beta;
            for w in 0..v {
                data[w * k + t] = (self.n_kv[t * v + w] as f64 + beta) / denom;
            }
        }
        TopicWordTable { k, data }
    }

    /// Smoothed K x V topic-word matrix.
    pub fn phi(&self, beta: f64) -> Matrix {
        let (k, v) = (self.k, self.v);
        let mut m = Matrix::zeros(k, v);
        for t in 0..k {
            let denom = self.n_k[t] as f64 + v as f64 * beta;
            for w in 0..v {
                m.data[t * v + w] = (self.n_kv[t * v + w] as f64 + beta) / denom;
            }
        }
        m
    }

    /// Smoothed D x K document-topic matrix. Only called for models whose
    /// post-estimation outputs are actually produced.
    pub fn theta(&self, alpha: f64) -> Matrix {
        let k = self.k;
        let mut m = Matrix::zeros(self.docs.len(), k);
        for (d, doc) in self.docs.iter().enumerate() {
            let n_d: u32 = doc.tokens.len() as u32;
            let denom = n_d as f64 + k as f64 * alpha;
            for t in 0..k {
                m.data[d * k + t] = (doc.n_dk[t] as f64 + alpha) / denom;
            }
        }
        m
    }

    pub fn into_model(self, hyper: &LdaHyperparams, vocab_version: &str) -> TopicModel {
        let phi = self.phi(hyper.beta);
        let theta = self.theta(hyper.alpha);
        TopicModel {
            format_version: MODEL_FORMAT_VERSION,
            phi,
            theta,
            hyper: hyper.clone(),
            vocab_version: vocab_version.to_string(),
            training_meta: TrainingMeta {
                sweeps_run: hyper.sweeps,
                log_likelihood: self.loglik,
                warning: self.warning,
            },
        }
    }
}

/// Frozen sweep conditional `(1 - MIX) * n_kv / n_k + MIX / V`, word-major.
/// Exactly invariant under proportional scaling of all counts.
fn sweep_conditional(k: usize, v: usize, n_kv: &[u64], n_k: &[u64]) -> TopicWordTable {
    let uniform = 1.0 / v as f64;
    let mut data = vec![0.0; k * v];
    for t in 0..k {
        if n_k[t] == 0 {
            for w in 0..v {
                data[w * k + t] = uniform;
            }
        } else {
            let denom = n_k[t] as f64;
            for w in 0..v {
                let ratio = n_kv[t * v + w] as f64 / denom;
                data[w * k + t] = (1.0 - COND_MIX) * ratio + COND_MIX * uniform;
            }
        }
    }
    TopicWordTable { k, data }
}

/// Within-document resampling passes per corpus sweep. The document-topic
/// side mixes quickly against a frozen topic-word table, so a few inner
/// passes per sweep buy most of the convergence of many extra sweeps.
const INNER_PASSES: u32 = 5;

fn resample_doc(doc: &mut DocState, cond: &TopicWordTable, alpha: f64, seed: u64, sweep: u32) {
    let k = cond.k;
    let stream_index = doc.content_hash ^ rng::splitmix64(sweep as u64);
    let mut stream = rng::substream(seed, SALT_SWEEP, stream_index);
    let mut weights = vec![0.0f64; k];
    for _ in 0..INNER_PASSES {
        for i in 0..doc.tokens.len() {
            let w = doc.tokens[i];
            let old = doc.z[i] as usize;
            doc.n_dk[old] -= 1;
            let cond_row = cond.row(w);
            for t in 0..k {
                weights[t] = (doc.n_dk[t] as f64 + alpha) * cond_row[t];
            }
            let new = rng::sample_weighted(&mut stream, &weights);
            doc.z[i] = new as u32;
            doc.n_dk[new] += 1;
        }
    }
}

fn doc_log_likelihood(doc: &DocState, phi_t: &TopicWordTable, alpha: f64) -> f64 {
    let k = phi_t.k;
    let n_d = doc.tokens.len() as f64;
    let denom = n_d + k as f64 * alpha;
    let theta: Vec<f64> = (0..k)
        .map(|t| (doc.n_dk[t] as f64 + alpha) / denom)
        .collect();
    let mut ll = 0.0;
    for &w in &doc.tokens {
        let row = phi_t.row(w);
        let p: f64 = row.iter().zip(&theta).map(|(pw, th)| pw * th).sum();
        ll += p.ln();
    }
    ll
}

fn rebuild_global_counts(state: &mut FitState) {
    state.n_kv.iter_mut().for_each(|c| *c = 0);
    state.n_k.iter_mut().for_each(|c| *c = 0);
    let v = state.v;
    for doc in &state.docs {
        for (&w, &z) in doc.tokens.iter().zip(&doc.z) {
            state.n_kv[z as usize * v + w as usize] += 1;
            state.n_k[z as usize] += 1;
        }
    }
}

#[cfg(feature = "rayon")]
fn for_each_doc(docs: &mut [DocState], f: impl Fn(&mut DocState) + Sync + Send) {
    docs.par_iter_mut().for_each(f);
}

#[cfg(not(feature = "rayon"))]
fn for_each_doc(docs: &mut [DocState], f: impl Fn(&mut DocState) + Sync + Send) {
    docs.iter_mut().for_each(f);
}

#[cfg(feature = "rayon")]
fn map_docs<T: Send>(docs: &[DocState], f: impl Fn(&DocState) -> T + Sync + Send) -> Vec<T> {
    docs.par_iter().map(f).collect()
}

#[cfg(not(feature = "rayon"))]
fn map_docs<T: Send>(docs: &[DocState], f: impl Fn(&DocState) -> T + Sync + Send) -> Vec<T> {
    docs.iter().map(f).collect()
}

fn fit_impl(
    bows: &[BowDoc],
    vocab: &Vocabulary,
    hyper: &LdaHyperparams,
    sequential: bool,
) -> Result<FitState, LdaError> {
    hyper.validate()?;
    if bows.is_empty() {
        return Err(LdaError::EmptyCorpus);
    }
    let v = vocab.len();
    for bow in bows {
        if let Some(&(id, _)) = bow.counts.iter().find(|&&(id, _)| id as usize >= v) {
            return Err(LdaError::TokenIdOutOfRange { id, vocab: v });
        }
    }
    let k = hyper.k;
    let warning = if k > v {
        Some(format!(
            "k={k} exceeds the {v} distinct tokens in the corpus; surplus topics will stay near-empty"
        ))
    } else {
        None
    };

    let mut docs: Vec<DocState> = bows
        .iter()
        .map(|bow| {
            let tokens = bow.expand();
            let content_hash = rng::hash_token_ids(&tokens);
            let len = tokens.len();
            DocState {
                tokens,
                z: vec![0; len],
                n_dk: vec![0; k],
                content_hash,
            }
        })
        .collect();

    let seed = hyper.seed;
    let init = |doc: &mut DocState| {
        let mut stream = rng::substream(seed, SALT_INIT, doc.content_hash);
        for i in 0..doc.tokens.len() {
            let t = rng::uniform_index(&mut stream, k);
            doc.z[i] = t as u32;
            doc.n_dk[t] += 1;
        }
    };
    if sequential {
        docs.iter_mut().for_each(init);
    } else {
        for_each_doc(&mut docs, init);
    }

    let mut state = FitState {
        k,
        v,
        docs,
        n_kv: vec![0; k * v],
        n_k: vec![0; k],
        loglik: Vec::with_capacity(hyper.sweeps as usize),
        warning,
    };
    rebuild_global_counts(&mut state);

    let alpha = hyper.alpha;
    for sweep in 0..hyper.sweeps {
        let cond = sweep_conditional(k, v, &state.n_kv, &state.n_k);
        let resample = |doc: &mut DocState| resample_doc(doc, &cond, alpha, seed, sweep);
        if sequential {
            state.docs.iter_mut().for_each(resample);
        } else {
            for_each_doc(&mut state.docs, resample);
        }
        rebuild_global_counts(&mut state);

        let phi_t = state.topic_word_table(hyper.beta);
        let per_doc = if sequential {
            state
                .docs
                .iter()
                .map(|d| doc_log_likelihood(d, &phi_t, alpha))
                .collect::<Vec<f64>>()
        } else {
            map_docs(&state.docs, |d| doc_log_likelihood(d, &phi_t, alpha))
        };
        // Summed in document order so both execution modes agree bitwise.
        state.loglik.push(per_doc.iter().sum());
    }
    Ok(state)
}

/// Fit the sampler without materialising a model; used by workflows that
/// score candidates before deciding which document-topic matrices to build.
pub(crate) fn fit(
    bows: &[BowDoc],
    vocab: &Vocabulary,
    hyper: &LdaHyperparams,
) -> Result<FitState, LdaError> {
    fit_impl(bows, vocab, hyper, false)
}

/// Train an LDA model. Deterministic: the same corpus, vocabulary and
/// hyperparameters produce a bit-identical model.
pub fn train(
    bows: &[BowDoc],
    vocab: &Vocabulary,
    hyper: &LdaHyperparams,
) -> Result<TopicModel, LdaError> {
    Ok(fit_impl(bows, vocab, hyper, false)?.into_model(hyper, vocab.version()))
}

/// Sequential-only variant of [`train`]. With the `rayon` feature enabled
/// the two produce bit-identical models; the benchmark suite compares their
/// throughput.
pub fn train_sequential(
    bows: &[BowDoc],
    vocab: &Vocabulary,
    hyper: &LdaHyperparams,
) -> Result<TopicModel, LdaError> {
    Ok(fit_impl(bows, vocab, hyper, true)?.into_model(hyper, vocab.version()))
}

/// Fold-in inference for a held-out document: resample topic assignments
/// with the topic-word table frozen, then return the smoothed theta row.
pub(crate) fn fold_in_theta(
    phi_t: &TopicWordTable,
    tokens: &[u32],
    alpha: f64,
    iterations: u32,
    seed: u64,
) -> Vec<f64> {
    let k = phi_t.k;
    let n_d = tokens.len();
    let denom = n_d as f64 + k as f64 * alpha;
    if n_d == 0 {
        return vec![1.0 / k as f64; k];
    }
    let mut stream = rng::substream(seed, SALT_FOLD_IN, rng::hash_token_ids(tokens));
    let mut z = vec![0u32; n_d];
    let mut n_dk = vec![0u32; k];
    for (i, _) in tokens.iter().enumerate() {
        let t = rng::uniform_index(&mut stream, k);
        z[i] = t as u32;
        n_dk[t] += 1;
    }
    let mut weights = vec![0.0f64; k];
    for _ in 0..iterations {
        for i in 0..n_d {
            let w = tokens[i];
            let old = z[i] as usize;
            n_dk[old] -= 1;
            let row = phi_t.row(w);
            for t in 0..k {
                weights[t] = (n_dk[t] as f64 + alpha) * row[t];
            }
            let new = rng::sample_weighted(&mut stream, &weights);
            z[i] = new as u32;
            n_dk[new] += 1;
        }
    }
    (0..k).map(|t| (n_dk[t] as f64 + alpha) / denom).collect()
}

/// Word-major view of a model's phi, for scoring loops.
pub(crate) fn word_major_phi(model: &TopicModel) -> TopicWordTable {
    let (k, v) = (model.k(), model.vocab_size());
    let mut data = vec![0.0; k * v];
    for t in 0..k {
        for w in 0..v {
            data[w * k + t] = model.phi.at(t, w);
        }
    }
    TopicWordTable { k, data }
}
