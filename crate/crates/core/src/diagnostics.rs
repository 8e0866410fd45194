//! Model-selection diagnostics: UMass coherence, held-out perplexity and
//! corpus-level topic prevalence.
//!
//! Coherence follows the document co-occurrence form: for each topic, the
//! sum over ordered pairs `i < j` of its top-`n` words of
//! `ln((D(w_i, w_j) + eps) / D(w_i))`, with the top list ordered by
//! descending word probability. The pair sum is reported raw, without
//! normalisation by the number of pairs; only rankings across candidate
//! topic counts are consumed downstream.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{BowDoc, Vocabulary};
use crate::lda::{self, Matrix, TopicModel};

#[cfg(feature = "rayon")]
use rayon::prelude::*;

/// Default number of top words entering the coherence pair sum.
pub const DEFAULT_TOP_N: usize = 10;
/// Default smoothing constant.
pub const DEFAULT_EPSILON: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("top_n must be at least 2, got {0}")]
    TopNTooSmall(usize),
    #[error("top_n {top_n} exceeds vocabulary size {vocab}")]
    TopNExceedsVocab { top_n: usize, vocab: usize },
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("no documents with tokens to evaluate")]
    EmptyEvaluation,
    #[error(transparent)]
    Lda(#[from] lda::LdaError),
}

/// Per-topic coherence scores and their mean.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub per_topic: Vec<f64>,
    pub mean: f64,
    pub top_n: usize,
    pub epsilon: f64,
}

fn coherence_from_top_ids(top: &[u32], vocab: &Vocabulary, epsilon: f64) -> f64 {
    let mut score = 0.0;
    for i in 0..top.len() {
        let df_i = vocab.doc_freq(top[i]);
        debug_assert!(df_i >= 1, "vocabulary guarantees doc_freq >= 1");
        for j in (i + 1)..top.len() {
            let co = vocab.co_doc_freq(top[i], top[j]);
            score += ((co as f64 + epsilon) / df_i as f64).ln();
        }
    }
    score
}

pub(crate) fn umass_from_phi(
    phi: &Matrix,
    vocab: &Vocabulary,
    top_n: usize,
    epsilon: f64,
) -> Result<CoherenceReport, DiagnosticsError> {
    if top_n < 2 {
        return Err(DiagnosticsError::TopNTooSmall(top_n));
    }
    if top_n > vocab.len() {
        return Err(DiagnosticsError::TopNExceedsVocab {
            top_n,
            vocab: vocab.len(),
        });
    }
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(DiagnosticsError::NonPositiveEpsilon(epsilon));
    }
    let k = phi.rows;
    let top_ids = |topic: usize| -> Vec<u32> {
        let row = phi.row(topic);
        let mut idx: Vec<u32> = (0..row.len() as u32).collect();
        idx.sort_by(|&a, &b| {
            row[b as usize]
                .partial_cmp(&row[a as usize])
                .unwrap()
                .then(a.cmp(&b))
        });
        idx.truncate(top_n);
        idx
    };
    // Per-topic scores are independent; collected in topic order.
    #[cfg(feature = "rayon")]
    let per_topic: Vec<f64> = (0..k)
        .into_par_iter()
        .map(|t| coherence_from_top_ids(&top_ids(t), vocab, epsilon))
        .collect();
    #[cfg(not(feature = "rayon"))]
    let per_topic: Vec<f64> = (0..k)
        .map(|t| coherence_from_top_ids(&top_ids(t), vocab, epsilon))
        .collect();
    let mean = per_topic.iter().sum::<f64>() / k as f64;
    Ok(CoherenceReport {
        per_topic,
        mean,
        top_n,
        epsilon,
    })
}

/// UMass coherence of every topic, plus the across-topic mean.
pub fn umass_coherence(
    model: &TopicModel,
    vocab: &Vocabulary,
    top_n: usize,
    epsilon: f64,
) -> Result<CoherenceReport, DiagnosticsError> {
    umass_from_phi(&model.phi, vocab, top_n, epsilon)
}

/// Held-out perplexity: `exp(-sum_d log p(w_d) / sum_d N_d)` where
/// `log p(w_d)` mixes the model's topic-word rows under a theta row inferred
/// by fold-in (assignments resampled with phi frozen, capped at
/// `per_doc_iterations`).
pub fn perplexity(model: &TopicModel, bows: &[BowDoc]) -> Result<f64, DiagnosticsError> {
    let total_tokens: usize = bows.iter().map(BowDoc::total).sum();
    if bows.is_empty() || total_tokens == 0 {
        return Err(DiagnosticsError::EmptyEvaluation);
    }
    let phi_t = lda::word_major_phi(model);
    let alpha = model.hyper.alpha;
    let iterations = model.hyper.per_doc_iterations;
    let seed = model.hyper.seed;

    let doc_ll = |bow: &BowDoc| -> f64 {
        let tokens = bow.expand();
        let theta = lda::fold_in_theta(&phi_t, &tokens, alpha, iterations, seed);
        let mut ll = 0.0;
        for &(w, c) in &bow.counts {
            let row = phi_t.row(w);
            let p: f64 = row.iter().zip(&theta).map(|(pw, th)| pw * th).sum();
            ll += c as f64 * p.ln();
        }
        ll
    };
    #[cfg(feature = "rayon")]
    let lls: Vec<f64> = bows.par_iter().map(doc_ll).collect();
    #[cfg(not(feature = "rayon"))]
    let lls: Vec<f64> = bows.iter().map(doc_ll).collect();

    let log_sum: f64 = lls.iter().sum();
    Ok((-log_sum / total_tokens as f64).exp())
}

/// Fraction of all corpus tokens attributed to each topic:
/// `share_k = sum_d sum_w c_dw * p(k | d, w) / sum_d N_d` with
/// `p(k | d, w) ∝ theta_dk * phi_kw`. Shares sum to 1.
pub fn token_share(model: &TopicModel, bows: &[BowDoc]) -> Result<Vec<f64>, DiagnosticsError> {
    let total_tokens: usize = bows.iter().map(BowDoc::total).sum();
    if bows.is_empty() || total_tokens == 0 {
        return Err(DiagnosticsError::EmptyEvaluation);
    }
    let k = model.k();
    let phi_t = lda::word_major_phi(model);
    let mut shares = vec![0.0f64; k];
    for (d, bow) in bows.iter().enumerate() {
        let theta = model.theta.row(d);
        for &(w, c) in &bow.counts {
            let row = phi_t.row(w);
            let mut resp: Vec<f64> = row.iter().zip(theta).map(|(pw, th)| pw * th).collect();
            let norm: f64 = resp.iter().sum();
            if norm > 0.0 {
                for r in &mut resp {
                    *r /= norm;
                }
            }
            for (t, r) in resp.iter().enumerate() {
                shares[t] += c as f64 * r;
            }
        }
    }
    for s in &mut shares {
        *s /= total_tokens as f64;
    }
    Ok(shares)
}

/// One row of the model-selection export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub k: usize,
    pub coherence_mean: f64,
    pub perplexity: f64,
}

/// CSV export: `k,coherence_mean,perplexity`, six decimals.
pub fn export_csv<W: std::io::Write>(rows: &[DiagnosticsRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "k,coherence_mean,perplexity")?;
    for row in rows {
        writeln!(
            w,
            "{},{:.6},{:.6}",
            row.k, row.coherence_mean, row.perplexity
        )?;
    }
    Ok(())
}

/// JSON export with full per-topic detail.
pub fn export_json<W: std::io::Write>(
    reports: &[(usize, CoherenceReport, f64)],
    w: W,
) -> serde_json::Result<()> {
    #[derive(Serialize)]
    struct Entry<'a> {
        k: usize,
        coherence: &'a CoherenceReport,
        perplexity: f64,
    }
    let entries: Vec<Entry> = reports
        .iter()
        .map(|(k, c, p)| Entry {
            k: *k,
            coherence: c,
            perplexity: *p,
        })
        .collect();
    serde_json::to_writer(w, &entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_corpus, PreprocessConfig, RawRecord};
    use crate::lda::{train, LdaHyperparams, TrainingMeta};

    fn toy_corpus() -> crate::corpus::BuiltCorpus {
        let cfg = PreprocessConfig {
            min_tokens: 1,
            ..PreprocessConfig::default()
        };
        let texts = [
            "solar wind battery solar",
            "solar battery grid",
            "kernel cache thread",
            "kernel cache memory thread",
            "solar grid wind battery kernel",
        ];
        let records: Vec<RawRecord> = texts
            .iter()
            .map(|t| RawRecord::new(None, t, None))
            .collect();
        build_corpus(&records, &cfg).unwrap()
    }

    /// Independent evaluation of the coherence sum: counts co-occurrence by
    /// scanning every document for every pair, no postings machinery.
    fn brute_force_umass(
        model: &TopicModel,
        corpus: &crate::corpus::BuiltCorpus,
        top_n: usize,
        eps: f64,
    ) -> Vec<f64> {
        let mut out = Vec::new();
        for t in 0..model.k() {
            let top: Vec<String> = model
                .top_words(&corpus.vocab, t, top_n)
                .unwrap()
                .into_iter()
                .map(|(w, _)| w)
                .collect();
            let mut score = 0.0;
            for i in 0..top.len() {
                for j in (i + 1)..top.len() {
                    let mut d_i = 0usize;
                    let mut d_ij = 0usize;
                    for doc in &corpus.docs {
                        let has_i = doc.tokens.iter().any(|tok| *tok == top[i]);
                        let has_j = doc.tokens.iter().any(|tok| *tok == top[j]);
                        if has_i {
                            d_i += 1;
                        }
                        if has_i && has_j {
                            d_ij += 1;
                        }
                    }
                    score += ((d_ij as f64 + eps) / d_i as f64).ln();
                }
            }
            out.push(score);
        }
        out
    }

    #[test]
    fn coherence_matches_brute_force_oracle() {
        let corpus = toy_corpus();
        let model = train(&corpus.bows, &corpus.vocab, &LdaHyperparams::new(2)).unwrap();
        let report = umass_coherence(&model, &corpus.vocab, 3, 1e-12).unwrap();
        let oracle = brute_force_umass(&model, &corpus, 3, 1e-12);
        for (got, want) in report.per_topic.iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-12, "got {got}, oracle {want}");
        }
        let mean = report.per_topic.iter().sum::<f64>() / report.per_topic.len() as f64;
        assert!((report.mean - mean).abs() < 1e-15);
    }

    #[test]
    fn perfect_cooccurrence_pair_score_is_near_zero() {
        // Two words that co-occur in every document containing the first:
        // pair score log(1 + eps/D) is a hair above zero.
        let cfg = PreprocessConfig {
            min_tokens: 1,
            ..PreprocessConfig::default()
        };
        let records: Vec<RawRecord> = (0..4)
            .map(|_| RawRecord::new(None, "alpha beta", None))
            .collect();
        let corpus = build_corpus(&records, &cfg).unwrap();
        let a = corpus.vocab.id("alpha").unwrap();
        let b = corpus.vocab.id("beta").unwrap();
        let eps = 1e-12;
        let d = corpus.vocab.doc_freq(a) as f64;
        let co = corpus.vocab.co_doc_freq(a, b) as f64;
        let score = ((co + eps) / d).ln();
        assert!(score > 0.0 && score < 1e-10);
    }

    #[test]
    fn zero_cooccurrence_pair_score_is_large_negative() {
        let eps = 1e-12;
        let score = ((0.0 + eps) / 10.0f64).ln();
        assert!((score - (eps / 10.0).ln()).abs() < 1e-12);
        assert!(score < -29.0);
    }

    #[test]
    fn coherence_rejects_bad_top_n() {
        let corpus = toy_corpus();
        let model = train(&corpus.bows, &corpus.vocab, &LdaHyperparams::new(2)).unwrap();
        assert!(matches!(
            umass_coherence(&model, &corpus.vocab, 1, 1e-12),
            Err(DiagnosticsError::TopNTooSmall(1))
        ));
        assert!(matches!(
            umass_coherence(&model, &corpus.vocab, 10_000, 1e-12),
            Err(DiagnosticsError::TopNExceedsVocab { .. })
        ));
    }

    #[test]
    fn coherence_is_permutation_equivariant() {
        let corpus = toy_corpus();
        let model = train(&corpus.bows, &corpus.vocab, &LdaHyperparams::new(3)).unwrap();
        let report = umass_coherence(&model, &corpus.vocab, 3, 1e-12).unwrap();

        // Relabel topics by rotating phi rows.
        let k = model.k();
        let v = model.vocab_size();
        let mut rotated = model.clone();
        for t in 0..k {
            let src = (t + 1) % k;
            for w in 0..v {
                rotated.phi.data[t * v + w] = model.phi.at(src, w);
            }
        }
        let rotated_report = umass_coherence(&rotated, &corpus.vocab, 3, 1e-12).unwrap();
        for t in 0..k {
            assert_eq!(rotated_report.per_topic[t], report.per_topic[(t + 1) % k]);
        }
        assert!((rotated_report.mean - report.mean).abs() < 1e-12);
    }

    fn uniform_model(k: usize, v: usize, n_docs: usize) -> TopicModel {
        TopicModel {
            format_version: lda::MODEL_FORMAT_VERSION,
            phi: Matrix {
                rows: k,
                cols: v,
                data: vec![1.0 / v as f64; k * v],
            },
            theta: Matrix {
                rows: n_docs,
                cols: k,
                data: vec![1.0 / k as f64; n_docs * k],
            },
            hyper: LdaHyperparams::new(k),
            vocab_version: "test".into(),
            training_meta: TrainingMeta {
                sweeps_run: 0,
                log_likelihood: vec![],
                warning: None,
            },
        }
    }

    #[test]
    fn uniform_model_perplexity_equals_vocab_size() {
        let corpus = toy_corpus();
        let v = corpus.vocab.len();
        let model = uniform_model(1, v, corpus.docs.len());
        let p = perplexity(&model, &corpus.bows).unwrap();
        assert!((p - v as f64).abs() < v as f64 * 1e-12, "perplexity {p} vs V={v}");
    }

    #[test]
    fn single_token_even_mixture_gives_perplexity_two() {
        // One document, one token, mixture probability exactly 0.5.
        let model = TopicModel {
            phi: Matrix {
                rows: 1,
                cols: 2,
                data: vec![0.5, 0.5],
            },
            theta: Matrix {
                rows: 1,
                cols: 1,
                data: vec![1.0],
            },
            ..uniform_model(1, 2, 1)
        };
        let bows = vec![BowDoc {
            doc_id: 0,
            counts: vec![(0, 1)],
        }];
        let p = perplexity(&model, &bows).unwrap();
        assert_eq!(p, 2.0);
    }

    #[test]
    #[allow(clippy::needless_range_loop)] // oracle kept in its dumbest form
    fn perplexity_matches_brute_force_formula() {
        let corpus = toy_corpus();
        let model = train(&corpus.bows, &corpus.vocab, &LdaHyperparams::new(2)).unwrap();
        let got = perplexity(&model, &corpus.bows).unwrap();

        // Oracle: recompute the formula directly from the same fold-in
        // thetas, using plain nested loops over the phi matrix.
        let phi_t = lda::word_major_phi(&model);
        let mut log_sum = 0.0;
        let mut n_total = 0usize;
        for bow in &corpus.bows {
            let tokens = bow.expand();
            let theta = lda::fold_in_theta(
                &phi_t,
                &tokens,
                model.hyper.alpha,
                model.hyper.per_doc_iterations,
                model.hyper.seed,
            );
            for &w in &tokens {
                let mut p = 0.0;
                for t in 0..model.k() {
                    p += theta[t] * model.phi.at(t, w as usize);
                }
                log_sum += p.ln();
            }
            n_total += tokens.len();
        }
        let want = (-log_sum / n_total as f64).exp();
        assert!((got - want).abs() < 1e-9, "got {got}, oracle {want}");
    }

    #[test]
    fn perplexity_rejects_empty_input() {
        let corpus = toy_corpus();
        let model = train(&corpus.bows, &corpus.vocab, &LdaHyperparams::new(2)).unwrap();
        assert!(matches!(
            perplexity(&model, &[]),
            Err(DiagnosticsError::EmptyEvaluation)
        ));
    }

    #[test]
    fn token_share_single_topic_is_one() {
        let corpus = toy_corpus();
        let model = train(&corpus.bows, &corpus.vocab, &LdaHyperparams::new(1)).unwrap();
        let shares = token_share(&model, &corpus.bows).unwrap();
        assert_eq!(shares.len(), 1);
        assert!((shares[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn token_shares_sum_to_one() {
        let corpus = toy_corpus();
        for k in [2, 3, 5] {
            let model = train(&corpus.bows, &corpus.vocab, &LdaHyperparams::new(k)).unwrap();
            let shares = token_share(&model, &corpus.bows).unwrap();
            let sum: f64 = shares.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "k={k}: shares sum {sum}");
        }
    }

    #[test]
    fn mirrored_corpus_splits_shares_evenly() {
        // Two mirrored word families with a hand-built symmetric two-topic
        // model: swapping the families maps topic 0 onto topic 1, so each
        // topic must receive exactly half of the tokens.
        let cfg = PreprocessConfig {
            min_tokens: 1,
            ..PreprocessConfig::default()
        };
        let mut records = Vec::new();
        for _ in 0..12 {
            records.push(RawRecord::new(None, "aa bb cc aa bb cc", None));
            records.push(RawRecord::new(None, "xx yy zz xx yy zz", None));
        }
        let corpus = build_corpus(&records, &cfg).unwrap();
        let v = corpus.vocab.len();
        assert_eq!(v, 6);
        let family = |w: &str| usize::from(["xx", "yy", "zz"].contains(&w));

        let eps = 1e-3;
        let mut phi = Matrix::zeros(2, v);
        for w in 0..v {
            let fam = family(corpus.vocab.token(w as u32));
            phi.data[w] = if fam == 0 { (1.0 - 3.0 * eps) / 3.0 } else { eps };
            phi.data[v + w] = if fam == 1 { (1.0 - 3.0 * eps) / 3.0 } else { eps };
        }
        let mut theta = Matrix::zeros(corpus.docs.len(), 2);
        for (d, doc) in corpus.docs.iter().enumerate() {
            let fam = family(&doc.tokens[0]);
            theta.data[d * 2 + fam] = 0.9;
            theta.data[d * 2 + 1 - fam] = 0.1;
        }
        let model = TopicModel {
            phi,
            theta,
            ..uniform_model(2, v, corpus.docs.len())
        };
        let shares = token_share(&model, &corpus.bows).unwrap();
        assert!(
            (shares[0] - 0.5).abs() < 1e-6 && (shares[1] - 0.5).abs() < 1e-6,
            "shares {shares:?}"
        );
    }

    #[test]
    fn csv_export_shape() {
        let rows = vec![
            DiagnosticsRow {
                k: 5,
                coherence_mean: -1.25,
                perplexity: 42.5,
            },
            DiagnosticsRow {
                k: 7,
                coherence_mean: -1.0,
                perplexity: 40.0,
            },
        ];
        let mut buf = Vec::new();
        export_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,coherence_mean,perplexity\n"));
        assert!(text.contains("5,-1.250000,42.500000"));
    }
}
