//! Corpus ingestion and deterministic preprocessing.
//!
//! Raw abstract-level records go through a fixed pipeline — lowercasing, URL
//! removal, punctuation/digit removal, whitespace tokenisation, stopword
//! removal, table lemmatisation — and come out as tokenised documents with a
//! dense vocabulary and bag-of-words counts. The stopword list and lemma
//! table are versioned assets bundled into the binary, so the same input
//! produces the same corpus everywhere.

use std::collections::{HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use rand_core::RngCore;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, SALT_SYNTH};

/// Version identifier of the bundled stopword list.
pub const STOPWORDS_VERSION: &str = "stopwords-en-v1";
/// Version identifier of the bundled lemma table.
pub const LEMMAS_VERSION: &str = "lemmas-en-v1";

const STOPWORDS_ASSET: &str = include_str!("../assets/stopwords_en_v1.txt");
const LEMMAS_ASSET: &str = include_str!("../assets/lemmas_en_v1.tsv");

/// Default URL pattern: maximal substrings starting with `http://`,
/// `https://` or `www.` up to the next whitespace.
pub const DEFAULT_URL_PATTERN: &str = r"(?:https?://|www\.)\S*";

/// Abstract values treated as missing, compared case-insensitively after
/// trimming. Whitespace-only abstracts are always treated as missing.
pub const PLACEHOLDER_ABSTRACTS: &[&str] = &[
    "no abstract available",
    "no abstract",
    "abstract not available",
    "abstract unavailable",
    "[no abstract available]",
    "n/a",
    "na",
    "none",
    "null",
];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("missing required column '{0}' in CSV header")]
    MissingColumn(String),
    #[error("malformed CSV row at line {line}: {message}")]
    MalformedRow { line: u64, message: String },
    #[error("no records to build a corpus from")]
    NoRecords,
    #[error("all {0} documents were dropped during preprocessing")]
    EmptyCorpus(usize),
    #[error("invalid preprocessing config: {0}")]
    InvalidConfig(String),
    #[error("invalid synthetic-corpus parameters: {0}")]
    InvalidSynthParams(String),
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// One abstract-level input record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawRecord {
    pub title: Option<String>,
    pub abstract_text: String,
    pub year: Option<i32>,
}

impl RawRecord {
    pub fn new(title: Option<&str>, abstract_text: &str, year: Option<i32>) -> Self {
        let title = title
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(String::from);
        let year = year.filter(|y| (1900..=2100).contains(y));
        RawRecord {
            title,
            abstract_text: abstract_text.trim().to_string(),
            year,
        }
    }
}

/// Named stopword set loaded from a versioned asset.
#[derive(Debug, Clone)]
pub struct StopwordList {
    pub version: String,
    words: HashSet<String>,
}

impl StopwordList {
    pub fn bundled() -> Self {
        Self::from_lines(STOPWORDS_VERSION, STOPWORDS_ASSET)
    }

    pub fn from_lines(version: &str, text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        StopwordList {
            version: version.to_string(),
            words,
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Surface-form to lemma lookup with identity fallback.
#[derive(Debug, Clone)]
pub struct LemmaTable {
    pub version: String,
    map: HashMap<String, String>,
}

impl LemmaTable {
    pub fn bundled() -> Self {
        Self::from_lines(LEMMAS_VERSION, LEMMAS_ASSET)
    }

    /// One entry per line, `surface<TAB>lemma`.
    pub fn from_lines(version: &str, text: &str) -> Self {
        let mut map = HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some((surface, lemma)) = line.split_once('\t') {
                map.insert(surface.trim().to_string(), lemma.trim().to_string());
            }
        }
        LemmaTable {
            version: version.to_string(),
            map,
        }
    }

    pub fn lemma<'a>(&'a self, token: &'a str) -> &'a str {
        self.map.get(token).map_or(token, String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Preprocessing configuration. The defaults reproduce the bundled assets
/// and a minimum document length of five tokens.
#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub min_tokens: usize,
    pub stopwords: StopwordList,
    pub lemmas: LemmaTable,
    pub url_pattern: String,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            min_tokens: 5,
            stopwords: StopwordList::bundled(),
            lemmas: LemmaTable::bundled(),
            url_pattern: DEFAULT_URL_PATTERN.to_string(),
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.min_tokens < 1 {
            return Err(CorpusError::InvalidConfig(
                "min_tokens must be at least 1".into(),
            ));
        }
        regex::Regex::new(&self.url_pattern)
            .map_err(|e| CorpusError::InvalidConfig(format!("bad url_pattern: {e}")))?;
        Ok(())
    }

    /// Asset versions, recorded in run manifests.
    pub fn asset_versions(&self) -> String {
        format!("{}+{}", self.stopwords.version, self.lemmas.version)
    }
}

/// A preprocessed document: ordered lemmas plus the publication year when
/// known.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct TokenizedDoc {
    pub doc_id: usize,
    pub tokens: Vec<String>,
    pub year: Option<i32>,
}

/// Dense token vocabulary with per-token document postings.
///
/// Ids are assigned in first-occurrence order over the retained documents,
/// so the mapping is a deterministic function of the corpus.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    token_to_id: HashMap<String, u32>,
    postings: Vec<Vec<u32>>,
    version: String,
}

impl Vocabulary {
    fn from_docs(docs: &[TokenizedDoc], asset_versions: &str) -> Self {
        let mut tokens: Vec<String> = Vec::new();
        let mut token_to_id: HashMap<String, u32> = HashMap::new();
        let mut postings: Vec<Vec<u32>> = Vec::new();
        for doc in docs {
            for tok in &doc.tokens {
                let id = *token_to_id.entry(tok.clone()).or_insert_with(|| {
                    tokens.push(tok.clone());
                    postings.push(Vec::new());
                    (tokens.len() - 1) as u32
                });
                let list = &mut postings[id as usize];
                if list.last() != Some(&(doc.doc_id as u32)) {
                    list.push(doc.doc_id as u32);
                }
            }
        }
        let content_hash = {
            let mut h = rng::fnv1a64(asset_versions.as_bytes());
            for t in &tokens {
                h ^= rng::fnv1a64(t.as_bytes());
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
            h
        };
        Vocabulary {
            tokens,
            token_to_id,
            postings,
            version: format!("vocab-{content_hash:016x}"),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    /// Number of documents containing the token.
    pub fn doc_freq(&self, id: u32) -> usize {
        self.postings[id as usize].len()
    }

    /// Number of documents containing both tokens. Symmetric;
    /// `co_doc_freq(w, w)` equals `doc_freq(w)`.
    pub fn co_doc_freq(&self, a: u32, b: u32) -> usize {
        if a == b {
            return self.doc_freq(a);
        }
        let (xs, ys) = (&self.postings[a as usize], &self.postings[b as usize]);
        let (mut i, mut j, mut count) = (0, 0, 0);
        while i < xs.len() && j < ys.len() {
            match xs[i].cmp(&ys[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    count += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        count
    }
}

/// Sparse bag-of-words counts for one document, sorted by token id.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct BowDoc {
    pub doc_id: usize,
    pub counts: Vec<(u32, u32)>,
}

impl BowDoc {
    fn from_tokens(doc_id: usize, token_ids: &[u32]) -> Self {
        let mut counts: HashMap<u32, u32> = HashMap::new();
        for &id in token_ids {
            *counts.entry(id).or_insert(0) += 1;
        }
        let mut counts: Vec<(u32, u32)> = counts.into_iter().collect();
        counts.sort_unstable();
        BowDoc { doc_id, counts }
    }

    /// Total token count; equals the source document length.
    pub fn total(&self) -> usize {
        self.counts.iter().map(|&(_, c)| c as usize).sum()
    }

    /// Token ids expanded to one entry per occurrence, in id order.
    pub fn expand(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.total());
        for &(id, c) in &self.counts {
            out.extend(std::iter::repeat_n(id, c as usize));
        }
        out
    }
}

/// A fully built corpus: tokenised docs, vocabulary and aligned bags.
#[derive(Debug, Clone)]
pub struct BuiltCorpus {
    pub docs: Vec<TokenizedDoc>,
    pub vocab: Vocabulary,
    pub bows: Vec<BowDoc>,
    /// Documents dropped for falling below `min_tokens`.
    pub dropped_short: usize,
    /// Asset versions used during preprocessing.
    pub asset_versions: String,
}

impl BuiltCorpus {
    /// Stable content hash over the retained token streams; recorded in run
    /// manifests so paired runs can prove they consumed identical inputs.
    pub fn content_hash(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for doc in &self.docs {
            for tok in &doc.tokens {
                h ^= rng::fnv1a64(tok.as_bytes());
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
            h ^= 0xff;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }

    pub fn total_tokens(&self) -> usize {
        self.docs.iter().map(|d| d.tokens.len()).sum()
    }
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

/// Result of loading a CSV: retained records plus the dropped-row count.
#[derive(Debug, Clone)]
pub struct LoadReport {
    pub records: Vec<RawRecord>,
    pub dropped: usize,
}

/// Column names for the input CSV. Extra columns are ignored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    pub title: String,
    pub abstract_col: String,
    pub year: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            title: "title".into(),
            abstract_col: "abstract".into(),
            year: "year".into(),
        }
    }
}

fn is_placeholder_abstract(text: &str) -> bool {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return true;
    }
    let lower = trimmed.to_lowercase();
    PLACEHOLDER_ABSTRACTS.iter().any(|p| *p == lower)
}

/// Load abstract-level records from a UTF-8, RFC-4180 CSV with a header row.
///
/// Records with missing, empty or placeholder abstracts are dropped and
/// counted. Retained order equals file order.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<LoadReport, CorpusError> {
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_csv_reader(file, schema)
}

/// Same as [`load_csv`] but over any reader; used by tests.
pub fn load_csv_reader<R: Read>(reader: R, schema: &CsvSchema) -> Result<LoadReport, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CorpusError::MalformedRow {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| -> Result<usize, CorpusError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CorpusError::MissingColumn(name.to_string()))
    };
    let title_idx = col(&schema.title)?;
    let abstract_idx = col(&schema.abstract_col)?;
    let year_idx = col(&schema.year)?;

    let mut records = Vec::new();
    let mut dropped = 0usize;
    for result in rdr.records() {
        let row = result.map_err(|e| CorpusError::MalformedRow {
            line: e
                .position()
                .map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let abstract_text = row.get(abstract_idx).unwrap_or("");
        if is_placeholder_abstract(abstract_text) {
            dropped += 1;
            continue;
        }
        let title = row.get(title_idx);
        let year = row
            .get(year_idx)
            .map(str::trim)
            .filter(|y| !y.is_empty())
            .and_then(|y| y.parse::<i32>().ok());
        records.push(RawRecord::new(title, abstract_text, year));
    }
    Ok(LoadReport { records, dropped })
}

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

/// Title and abstract joined by a single space; abstract alone when the
/// title is absent or empty.
pub fn compose_text(record: &RawRecord) -> String {
    match record.title.as_deref().map(str::trim) {
        Some(t) if !t.is_empty() => format!("{t} {}", record.abstract_text),
        _ => record.abstract_text.clone(),
    }
}

/// Reusable preprocessor with the URL pattern compiled once.
pub struct Preprocessor<'a> {
    config: &'a PreprocessConfig,
    url_regex: regex::Regex,
}

impl<'a> Preprocessor<'a> {
    pub fn new(config: &'a PreprocessConfig) -> Result<Self, CorpusError> {
        config.validate()?;
        let url_regex = regex::Regex::new(&config.url_pattern)
            .map_err(|e| CorpusError::InvalidConfig(format!("bad url_pattern: {e}")))?;
        Ok(Preprocessor { config, url_regex })
    }

    /// The pipeline, in order: lowercase, URL removal, punctuation and digit
    /// removal, whitespace tokenisation, stopword removal, lemmatisation.
    pub fn run(&self, text: &str) -> Vec<String> {
        let lowered = text.to_lowercase();
        let no_urls = self.url_regex.replace_all(&lowered, "");
        let cleaned: String = no_urls
            .chars()
            .filter(|c| c.is_alphabetic() || c.is_whitespace())
            .collect();
        cleaned
            .split_whitespace()
            .filter(|tok| !self.config.stopwords.contains(tok))
            .map(|tok| self.config.lemmas.lemma(tok).to_string())
            .collect()
    }
}

/// One-shot preprocessing of a single text. Compiles the URL pattern on
/// every call; prefer [`Preprocessor`] for whole corpora.
pub fn preprocess(text: &str, config: &PreprocessConfig) -> Vec<String> {
    let pp = Preprocessor::new(config).expect("invalid preprocessing config");
    pp.run(text)
}

/// Build the corpus: preprocess every record, drop documents shorter than
/// `min_tokens`, assign dense doc ids and token ids, and produce aligned
/// bag-of-words counts.
pub fn build_corpus(
    records: &[RawRecord],
    config: &PreprocessConfig,
) -> Result<BuiltCorpus, CorpusError> {
    if records.is_empty() {
        return Err(CorpusError::NoRecords);
    }
    let pp = Preprocessor::new(config)?;
    let mut docs: Vec<TokenizedDoc> = Vec::new();
    let mut dropped_short = 0usize;
    for record in records {
        let tokens = pp.run(&compose_text(record));
        if tokens.len() < config.min_tokens {
            dropped_short += 1;
            continue;
        }
        docs.push(TokenizedDoc {
            doc_id: docs.len(),
            tokens,
            year: record.year,
        });
    }
    if docs.is_empty() {
        return Err(CorpusError::EmptyCorpus(records.len()));
    }
    let asset_versions = config.asset_versions();
    let vocab = Vocabulary::from_docs(&docs, &asset_versions);
    let bows = docs
        .iter()
        .map(|doc| {
            let ids: Vec<u32> = doc
                .tokens
                .iter()
                .map(|t| vocab.id(t).expect("token present in vocabulary"))
                .collect();
            BowDoc::from_tokens(doc.doc_id, &ids)
        })
        .collect();
    Ok(BuiltCorpus {
        docs,
        vocab,
        bows,
        dropped_short,
        asset_versions,
    })
}

/// Rebuild a corpus from already-tokenised documents (synthetic corpora).
pub fn corpus_from_tokenized(docs: Vec<TokenizedDoc>) -> Result<BuiltCorpus, CorpusError> {
    if docs.is_empty() {
        return Err(CorpusError::NoRecords);
    }
    let asset_versions = "synthetic".to_string();
    let vocab = Vocabulary::from_docs(&docs, &asset_versions);
    let bows = docs
        .iter()
        .map(|doc| {
            let ids: Vec<u32> = doc
                .tokens
                .iter()
                .map(|t| vocab.id(t).expect("token present in vocabulary"))
                .collect();
            BowDoc::from_tokens(doc.doc_id, &ids)
        })
        .collect();
    Ok(BuiltCorpus {
        docs,
        vocab,
        bows,
        dropped_short: 0,
        asset_versions,
    })
}

// ---------------------------------------------------------------------------
// Synthetic corpora
// ---------------------------------------------------------------------------

/// Ground-truth parameters of a synthetic corpus: the planted topic–word
/// rows, the per-document topic proportions actually drawn, and the word
/// strings backing each column.
#[derive(Debug, Clone)]
pub struct PlantedTopics {
    pub phi: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub words: Vec<String>,
}

impl PlantedTopics {
    /// Top-`n` word strings of planted topic `k` by descending mass, ties by
    /// ascending word index.
    pub fn top_words(&self, k: usize, n: usize) -> Vec<String> {
        let row = &self.phi[k];
        let mut idx: Vec<usize> = (0..row.len()).collect();
        idx.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
        idx.into_iter()
            .take(n)
            .map(|v| self.words[v].clone())
            .collect()
    }
}

fn dirichlet<R: RngCore>(rng: &mut R, concentration: &[f64]) -> Vec<f64> {
    let mut draws: Vec<f64> = concentration
        .iter()
        .map(|&a| {
            let g = Gamma::new(a, 1.0).expect("positive concentration");
            let mut x: f64 = g.sample(rng);
            // Guard against underflow at very small concentrations.
            if x <= 0.0 {
                x = f64::MIN_POSITIVE;
            }
            x
        })
        .collect();
    let total: f64 = draws.iter().sum();
    for d in &mut draws {
        *d /= total;
    }
    draws
}

/// Letters-only token name for synthetic vocabulary index `v` (`waa`,
/// `wab`, ...), chosen to pass through preprocessing unchanged.
pub fn synthetic_word(v: usize) -> String {
    let mut out = String::from("w");
    let (hi, lo) = (v / 26, v % 26);
    out.push((b'a' + (hi % 26) as u8) as char);
    out.push((b'a' + lo as u8) as char);
    if hi >= 26 {
        out.push((b'a' + (hi / 26 % 26) as u8) as char);
    }
    out
}

/// Sample a corpus from the LDA generative process and return it together
/// with the planted parameters.
///
/// Topic–word rows are Dirichlet draws over the whole vocabulary with a
/// structured concentration: the vocabulary is split into `k_true`
/// contiguous blocks, and topic `k` has concentration 1 on its own block and
/// `beta` elsewhere. `beta = 1` gives fully exchangeable topics; as `beta`
/// approaches zero the planted topics concentrate on disjoint word blocks,
/// which is the regime used for recovery oracles. Documents then follow the
/// standard process: `theta_d ~ Dir(alpha)`, one topic per token from
/// `theta_d`, one word per token from the topic row.
///
/// Token strings are letters-only (`waa`, `wab`, ...) in vocabulary order
/// so they survive preprocessing intact. The same seed always yields
/// token-identical corpora.
pub fn generate_synthetic(
    k_true: usize,
    vocab_size: usize,
    n_docs: usize,
    doc_len: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
) -> Result<(Vec<TokenizedDoc>, PlantedTopics), CorpusError> {
    if k_true < 1 {
        return Err(CorpusError::InvalidSynthParams("k_true must be >= 1".into()));
    }
    if vocab_size < k_true {
        return Err(CorpusError::InvalidSynthParams(
            "vocab_size must be >= k_true".into(),
        ));
    }
    if n_docs < 1 || doc_len < 1 {
        return Err(CorpusError::InvalidSynthParams(
            "n_docs and doc_len must be >= 1".into(),
        ));
    }
    if alpha <= 0.0 || beta <= 0.0 {
        return Err(CorpusError::InvalidSynthParams(
            "alpha and beta must be positive".into(),
        ));
    }

    let words: Vec<String> = (0..vocab_size).map(synthetic_word).collect();

    // Planted topic-word rows, one stream per topic.
    let block = vocab_size.div_ceil(k_true);
    let mut phi = Vec::with_capacity(k_true);
    for k in 0..k_true {
        let mut conc = vec![beta; vocab_size];
        let lo = k * block;
        let hi = ((k + 1) * block).min(vocab_size);
        for c in conc.iter_mut().take(hi).skip(lo) {
            *c = 1.0;
        }
        let mut stream = rng::substream(seed, SALT_SYNTH, k as u64);
        phi.push(dirichlet(&mut stream, &conc));
    }

    // Documents, one stream per document.
    let alpha_vec = vec![alpha; k_true];
    let mut theta = Vec::with_capacity(n_docs);
    let mut docs = Vec::with_capacity(n_docs);
    for d in 0..n_docs {
        let mut stream = rng::substream(seed, SALT_SYNTH, 0x1000_0000 + d as u64);
        let theta_d = dirichlet(&mut stream, &alpha_vec);
        let mut tokens = Vec::with_capacity(doc_len);
        for _ in 0..doc_len {
            let z = rng::sample_weighted(&mut stream, &theta_d);
            let w = rng::sample_weighted(&mut stream, &phi[z]);
            tokens.push(words[w].clone());
        }
        theta.push(theta_d);
        docs.push(TokenizedDoc {
            doc_id: d,
            tokens,
            year: None,
        });
    }

    Ok((docs, PlantedTopics { phi, theta, words }))
}
