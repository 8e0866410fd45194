//! Output-equivalence checks between topic models at a common K: Jaccard
//! similarity of top-word sets, optimal one-to-one topic matching, and the
//! mean matched similarity consumed by the benchmark reports.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lda::{LdaError, Matrix, TopicModel};

/// Default number of top words per topic entering the comparison.
pub const DEFAULT_TOP_N: usize = 10;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("both word sets are empty")]
    BothSetsEmpty,
    #[error("topic counts differ: {a} vs {b}; models are only compared at a common K")]
    KMismatch { a: usize, b: usize },
    #[error("vocabulary versions differ: '{a}' vs '{b}'")]
    VocabMismatch { a: String, b: String },
    #[error("similarity matrix contains non-finite entries")]
    NonFinite,
    #[error(transparent)]
    Lda(#[from] LdaError),
}

/// Jaccard index `|a ∩ b| / |a ∪ b|` of two word sets.
pub fn jaccard<T: Eq + std::hash::Hash>(a: &HashSet<T>, b: &HashSet<T>) -> Result<f64, AlignError> {
    if a.is_empty() && b.is_empty() {
        return Err(AlignError::BothSetsEmpty);
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    Ok(inter as f64 / union as f64)
}

/// K x K matrix of pairwise top-word Jaccard similarities; cell `(i, j)`
/// compares topic `i` of model A with topic `j` of model B.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub k: usize,
    pub top_n: usize,
    pub cells: Matrix,
}

impl SimilarityMatrix {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.cells.at(i, j)
    }

    pub fn from_cells(k: usize, top_n: usize, cells: Vec<f64>) -> Self {
        assert_eq!(cells.len(), k * k);
        SimilarityMatrix {
            k,
            top_n,
            cells: Matrix {
                rows: k,
                cols: k,
                data: cells,
            },
        }
    }
}

/// Pairwise similarity of two models' topics over their top-`top_n` word
/// sets. Requires equal K and a shared vocabulary version.
pub fn similarity_matrix(
    model_a: &TopicModel,
    model_b: &TopicModel,
    top_n: usize,
) -> Result<SimilarityMatrix, AlignError> {
    if model_a.k() != model_b.k() {
        return Err(AlignError::KMismatch {
            a: model_a.k(),
            b: model_b.k(),
        });
    }
    if model_a.vocab_version != model_b.vocab_version {
        return Err(AlignError::VocabMismatch {
            a: model_a.vocab_version.clone(),
            b: model_b.vocab_version.clone(),
        });
    }
    let k = model_a.k();
    let sets = |model: &TopicModel| -> Result<Vec<HashSet<u32>>, AlignError> {
        (0..k)
            .map(|t| {
                Ok(model
                    .top_word_ids(t, top_n)?
                    .into_iter()
                    .map(|(v, _)| v)
                    .collect())
            })
            .collect()
    };
    let a_sets = sets(model_a)?;
    let b_sets = sets(model_b)?;
    let mut cells = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            cells[i * k + j] = jaccard(&a_sets[i], &b_sets[j])?;
        }
    }
    Ok(SimilarityMatrix::from_cells(k, top_n, cells))
}

/// An optimal one-to-one topic matching.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Matching {
    /// `permutation[i]` is the B-topic matched to A-topic `i`.
    pub permutation: Vec<usize>,
    pub total: f64,
    pub mean_matched: f64,
}

impl Matching {
    /// Matched similarity per A-topic, in topic order.
    pub fn per_topic(&self, matrix: &SimilarityMatrix) -> Vec<f64> {
        self.permutation
            .iter()
            .enumerate()
            .map(|(i, &j)| matrix.at(i, j))
            .collect()
    }
}

/// Jonker-style augmenting-path assignment on an `n x n` cost matrix
/// (row-major), O(n^3). Returns the column assigned to each row.
fn min_cost_assignment(n: usize, cost: &[f64]) -> Vec<usize> {
    const INF: f64 = f64::INFINITY;
    // 1-indexed potentials over rows (u) and columns (v).
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut match_col = vec![0usize; n + 1]; // row matched to each column
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        match_col[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = match_col[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[match_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if match_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            match_col[j0] = match_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if match_col[j] > 0 {
            assignment[match_col[j] - 1] = j - 1;
        }
    }
    assignment
}

fn assignment_max_total(k: usize, sim: &[f64]) -> (Vec<usize>, f64) {
    // Maximise by negating against the largest cell, keeping costs >= 0.
    let shift = sim.iter().cloned().fold(0.0f64, f64::max);
    let cost: Vec<f64> = sim.iter().map(|&s| shift - s).collect();
    let perm = min_cost_assignment(k, &cost);
    let total = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| sim[i * k + j])
        .sum();
    (perm, total)
}

/// Maximum-total one-to-one matching of the similarity matrix.
///
/// Implemented as min-cost assignment on negated similarities. Among
/// matchings whose totals tie within 1e-9 the lexicographically smallest
/// permutation is returned.
pub fn hungarian_max(matrix: &SimilarityMatrix) -> Result<Matching, AlignError> {
    let k = matrix.k;
    let sim = &matrix.cells.data;
    if sim.iter().any(|x| !x.is_finite()) {
        return Err(AlignError::NonFinite);
    }
    let (_, best_total) = assignment_max_total(k, sim);
    let tol = 1e-9 * best_total.abs().max(1.0);

    // Fix rows one at a time to the smallest column that still reaches the
    // optimal total, resolving ties deterministically.
    let mut fixed: Vec<usize> = Vec::with_capacity(k);
    let mut used = vec![false; k];
    for i in 0..k {
        let fixed_sum: f64 = fixed
            .iter()
            .enumerate()
            .map(|(r, &c)| sim[r * k + c])
            .sum();
        for j in 0..k {
            if used[j] {
                continue;
            }
            // Total of the best completion with rows 0..=i pinned.
            let rest_rows: Vec<usize> = ((i + 1)..k).collect();
            let rest_cols: Vec<usize> = (0..k).filter(|&c| !used[c] && c != j).collect();
            let rest_best = if rest_rows.is_empty() {
                0.0
            } else {
                let m = rest_rows.len();
                let mut sub = vec![0.0; m * m];
                for (ri, &r) in rest_rows.iter().enumerate() {
                    for (ci, &c) in rest_cols.iter().enumerate() {
                        sub[ri * m + ci] = sim[r * k + c];
                    }
                }
                assignment_max_total(m, &sub).1
            };
            if fixed_sum + sim[i * k + j] + rest_best >= best_total - tol {
                fixed.push(j);
                used[j] = true;
                break;
            }
        }
        debug_assert_eq!(fixed.len(), i + 1, "no column completed the optimum");
    }

    let total: f64 = fixed.iter().enumerate().map(|(i, &j)| sim[i * k + j]).sum();
    Ok(Matching {
        mean_matched: total / k as f64,
        permutation: fixed,
        total,
    })
}

/// Mean matched Jaccard of two models' top-word sets under the optimal
/// matching. Symmetric in its arguments and invariant to topic relabeling.
pub fn mean_matched_jaccard(
    model_a: &TopicModel,
    model_b: &TopicModel,
    top_n: usize,
) -> Result<f64, AlignError> {
    let matrix = similarity_matrix(model_a, model_b, top_n)?;
    Ok(hungarian_max(&matrix)?.mean_matched)
}

/// Full comparison record: matrix, optimal permutation, per-topic matched
/// similarities and their mean.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub k: usize,
    pub top_n: usize,
    pub matrix: SimilarityMatrix,
    pub permutation: Vec<usize>,
    pub per_topic: Vec<f64>,
    pub mean_matched: f64,
}

pub fn alignment_report(
    model_a: &TopicModel,
    model_b: &TopicModel,
    top_n: usize,
) -> Result<AlignmentReport, AlignError> {
    let matrix = similarity_matrix(model_a, model_b, top_n)?;
    let matching = hungarian_max(&matrix)?;
    let per_topic = matching.per_topic(&matrix);
    Ok(AlignmentReport {
        k: matrix.k,
        top_n,
        permutation: matching.permutation,
        per_topic,
        mean_matched: matching.mean_matched,
        matrix,
    })
}

/// Brute-force maximum over all K! permutations. Exposed for oracle tests;
/// only sensible for small K.
pub fn brute_force_max(matrix: &SimilarityMatrix) -> (Vec<usize>, f64) {
    fn permute(
        k: usize,
        sim: &Matrix,
        current: &mut Vec<usize>,
        used: &mut Vec<bool>,
        best: &mut (Vec<usize>, f64),
    ) {
        if current.len() == k {
            let total: f64 = current
                .iter()
                .enumerate()
                .map(|(i, &j)| sim.at(i, j))
                .sum();
            if total > best.1 {
                *best = (current.clone(), total);
            }
            return;
        }
        for j in 0..k {
            if !used[j] {
                used[j] = true;
                current.push(j);
                permute(k, sim, current, used, best);
                current.pop();
                used[j] = false;
            }
        }
    }
    let k = matrix.k;
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    permute(
        k,
        &matrix.cells,
        &mut Vec::new(),
        &mut vec![false; k],
        &mut best,
    );
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{corpus_from_tokenized, generate_synthetic};
    use crate::lda::{train, LdaHyperparams};
    use crate::rng;
    use rand_core::RngCore;

    fn set(words: &[&str]) -> HashSet<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn jaccard_identity_disjoint_and_half() {
        let abc = set(&["a", "b", "c"]);
        assert_eq!(jaccard(&abc, &abc).unwrap(), 1.0);
        assert_eq!(jaccard(&set(&["a", "b"]), &set(&["c", "d"])).unwrap(), 0.0);
        assert_eq!(
            jaccard(&abc, &set(&["b", "c", "d"])).unwrap(),
            0.5
        );
    }

    #[test]
    fn jaccard_rejects_two_empty_sets() {
        let empty: HashSet<String> = HashSet::new();
        assert!(matches!(
            jaccard(&empty, &empty),
            Err(AlignError::BothSetsEmpty)
        ));
        assert_eq!(jaccard(&empty, &set(&["a"])).unwrap(), 0.0);
    }

    fn trained_pair() -> (crate::lda::TopicModel, crate::lda::TopicModel) {
        let (docs, _) = generate_synthetic(3, 30, 60, 25, 0.4, 1e-3, 21).unwrap();
        let corpus = corpus_from_tokenized(docs).unwrap();
        let hyper = LdaHyperparams::new(3);
        let a = train(&corpus.bows, &corpus.vocab, &hyper).unwrap();
        let b = train(&corpus.bows, &corpus.vocab, &hyper).unwrap();
        (a, b)
    }

    #[test]
    fn self_similarity_has_unit_diagonal() {
        let (a, _) = trained_pair();
        let m = similarity_matrix(&a, &a, 5).unwrap();
        for i in 0..m.k {
            assert_eq!(m.at(i, i), 1.0);
        }
    }

    #[test]
    fn permuted_topics_permute_columns() {
        let (a, b) = trained_pair();
        let m = similarity_matrix(&a, &b, 5).unwrap();

        // Rotate b's topics by one.
        let k = b.k();
        let v = b.vocab_size();
        let mut rotated = b.clone();
        for t in 0..k {
            let src = (t + 1) % k;
            for w in 0..v {
                rotated.phi.data[t * v + w] = b.phi.at(src, w);
            }
        }
        let mr = similarity_matrix(&a, &rotated, 5).unwrap();
        for i in 0..k {
            for j in 0..k {
                assert_eq!(mr.at(i, j), m.at(i, (j + 1) % k));
            }
        }
    }

    #[test]
    fn similarity_matrix_rejects_k_mismatch() {
        let (docs, _) = generate_synthetic(2, 20, 30, 20, 0.5, 1e-2, 3).unwrap();
        let corpus = corpus_from_tokenized(docs).unwrap();
        let a = train(&corpus.bows, &corpus.vocab, &LdaHyperparams::new(2)).unwrap();
        let b = train(&corpus.bows, &corpus.vocab, &LdaHyperparams::new(3)).unwrap();
        assert!(matches!(
            similarity_matrix(&a, &b, 5),
            Err(AlignError::KMismatch { a: 2, b: 3 })
        ));
    }

    #[test]
    fn hand_built_two_by_two_matrix() {
        // Two tiny "models" as bare word sets: hand-computed Jaccards.
        let a0 = set(&["a", "b", "c"]);
        let a1 = set(&["x", "y", "z"]);
        let b0 = set(&["a", "b", "d"]);
        let b1 = set(&["x", "y", "q"]);
        let cells = vec![
            jaccard(&a0, &b0).unwrap(),
            jaccard(&a0, &b1).unwrap(),
            jaccard(&a1, &b0).unwrap(),
            jaccard(&a1, &b1).unwrap(),
        ];
        assert_eq!(cells, vec![0.5, 0.0, 0.0, 0.5]);
        let m = SimilarityMatrix::from_cells(2, 3, cells);
        let matching = hungarian_max(&m).unwrap();
        assert_eq!(matching.permutation, vec![0, 1]);
        assert_eq!(matching.total, 1.0);
    }

    #[test]
    fn hungarian_identity_matrix() {
        let k = 4;
        let mut cells = vec![0.0; k * k];
        for i in 0..k {
            cells[i * k + i] = 1.0;
        }
        let m = SimilarityMatrix::from_cells(k, 10, cells);
        let matching = hungarian_max(&m).unwrap();
        assert_eq!(matching.permutation, vec![0, 1, 2, 3]);
        assert_eq!(matching.total, 4.0);
        assert_eq!(matching.mean_matched, 1.0);
    }

    #[test]
    fn hungarian_prefers_diagonal_in_worked_example() {
        let m = SimilarityMatrix::from_cells(2, 10, vec![0.9, 0.1, 0.2, 0.8]);
        let matching = hungarian_max(&m).unwrap();
        assert_eq!(matching.permutation, vec![0, 1]);
        assert!((matching.total - 1.7).abs() < 1e-12);
    }

    #[test]
    fn hungarian_antidiagonal_forces_reversal() {
        let k = 3;
        let mut cells = vec![0.0; k * k];
        for i in 0..k {
            cells[i * k + (k - 1 - i)] = 1.0;
        }
        let m = SimilarityMatrix::from_cells(k, 10, cells);
        let matching = hungarian_max(&m).unwrap();
        assert_eq!(matching.permutation, vec![2, 1, 0]);
        assert_eq!(matching.mean_matched, 1.0);
    }

    #[test]
    fn hungarian_rejects_non_finite() {
        let m = SimilarityMatrix::from_cells(2, 10, vec![0.1, f64::NAN, 0.2, 0.3]);
        assert!(matches!(hungarian_max(&m), Err(AlignError::NonFinite)));
    }

    #[test]
    fn hungarian_matches_brute_force_on_random_matrices() {
        let mut stream = rng::substream(17, rng::SALT_BOOTSTRAP, 99);
        for trial in 0..60 {
            let k = 2 + (trial % 5); // K in 2..=6
            let cells: Vec<f64> = (0..k * k).map(|_| rng::unit_f64(&mut stream)).collect();
            let m = SimilarityMatrix::from_cells(k, 10, cells);
            let matching = hungarian_max(&m).unwrap();
            let (_, brute_total) = brute_force_max(&m);
            assert_eq!(
                matching.total, brute_total,
                "trial {trial}: hungarian {} vs brute {}",
                matching.total, brute_total
            );
        }
    }

    #[test]
    fn tie_break_is_lexicographically_smallest() {
        // All-equal matrix: every permutation is optimal; identity is the
        // lexicographically smallest.
        let k = 4;
        let m = SimilarityMatrix::from_cells(k, 10, vec![0.5; k * k]);
        let matching = hungarian_max(&m).unwrap();
        assert_eq!(matching.permutation, vec![0, 1, 2, 3]);
    }

    #[test]
    fn mean_matched_jaccard_is_one_for_same_seed_models() {
        let (a, b) = trained_pair();
        assert_eq!(mean_matched_jaccard(&a, &b, 10).unwrap(), 1.0);
    }

    #[test]
    fn mean_matched_jaccard_is_symmetric_and_label_invariant() {
        let (docs, _) = generate_synthetic(3, 30, 60, 25, 0.4, 1e-3, 2).unwrap();
        let corpus = corpus_from_tokenized(docs).unwrap();
        let a = train(&corpus.bows, &corpus.vocab, &LdaHyperparams::new(3)).unwrap();
        let b = train(
            &corpus.bows,
            &corpus.vocab,
            &LdaHyperparams::new(3).with_seed(77),
        )
        .unwrap();
        let ab = mean_matched_jaccard(&a, &b, 5).unwrap();
        let ba = mean_matched_jaccard(&b, &a, 5).unwrap();
        assert!((ab - ba).abs() < 1e-12);

        // Relabeling b's topics must not change the value.
        let k = b.k();
        let v = b.vocab_size();
        let mut rotated = b.clone();
        for t in 0..k {
            let src = (t + 2) % k;
            for w in 0..v {
                rotated.phi.data[t * v + w] = b.phi.at(src, w);
            }
        }
        let rot = mean_matched_jaccard(&a, &rotated, 5).unwrap();
        assert!((ab - rot).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn disjoint_vocabular_top_words_give_zero() {
        let mut rng_stream = rng::substream(5, rng::SALT_BOOTSTRAP, 1);
        let _ = rng_stream.next_u64();
        // Hand-built phi rows concentrated on disjoint id ranges.
        let (docs, _) = generate_synthetic(2, 40, 30, 20, 0.5, 1e-2, 9).unwrap();
        let corpus = corpus_from_tokenized(docs).unwrap();
        let a = train(&corpus.bows, &corpus.vocab, &LdaHyperparams::new(2)).unwrap();
        let mut b = a.clone();
        // Shift all of b's top mass to ids untouched by a's top lists.
        let v = b.vocab_size();
        for t in 0..b.k() {
            for w in 0..v {
                b.phi.data[t * v + w] = if w >= v - 2 - t && w < v - t {
                    0.5
                } else {
                    1e-9
                };
            }
        }
        let mm = mean_matched_jaccard(&a, &b, 2).unwrap();
        assert_eq!(mm, 0.0);
    }
}
