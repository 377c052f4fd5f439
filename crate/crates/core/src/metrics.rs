//! Evaluation and diagnostics: P@1 accuracy, dictionary similarity,
//! dictionary corruption, eigenvector similarity of nearest-neighbour
//! graphs, hubness, and the oracle initialization quantities.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::embedding_io::ResolvedGold;
use crate::error::{Error, Result};
use crate::init::StructuralProfile;
use crate::self_learning::row_normalized;

/// Default neighbourhood size of the graphs compared by [`eigenvector_similarity`].
pub const DEFAULT_GRAPH_NEIGHBORS: usize = 10;
/// Fraction of the Laplacian spectrum that selects how many eigenvalues are compared.
pub const SPECTRUM_ENERGY: f64 = 0.9;

fn first_targets(translations: &Dictionary) -> HashMap<usize, usize> {
    let mut map = HashMap::with_capacity(translations.len());
    for &(s, t) in translations.pairs() {
        map.entry(s).or_insert(t);
    }
    map
}

/// Fraction of gold source words whose (first) predicted target is one of
/// their gold targets. Missing predictions and unreachable targets count as
/// misses.
pub fn accuracy_p1(translations: &Dictionary, gold: &ResolvedGold) -> Result<f64> {
    if gold.num_evaluated() == 0 {
        return Err(Error::EmptyEvaluation("no gold source word is in the vocabulary".into()));
    }
    let predicted = first_targets(translations);
    let hits = gold
        .sources()
        .filter(|s| {
            predicted
                .get(s)
                .is_some_and(|&t| gold.targets(*s).contains(&Some(t)))
        })
        .count();
    Ok(hits as f64 / gold.num_evaluated() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DictionarySimilarity {
    pub value: f64,
    pub evaluated: usize,
    /// Gold sources without a prediction or without any reachable target.
    pub skipped: usize,
}

fn row_cosine(m: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    let (a, b) = (m.row(i), m.row(j));
    if i == j && a.norm() > 0.0 {
        return 1.0;
    }
    let norm = a.norm() * b.norm();
    if norm == 0.0 {
        return 0.0;
    }
    a.dot(&b) / norm
}

/// Mean cosine between the embedding of each predicted target and the
/// closest of the word's gold targets.
pub fn dictionary_similarity(
    dict: &Dictionary,
    gold: &ResolvedGold,
    tgt_emb: &DMatrix<f64>,
) -> Result<DictionarySimilarity> {
    let predicted = first_targets(dict);
    let mut sum = 0.0;
    let mut evaluated = 0;
    let mut skipped = 0;
    for s in gold.sources() {
        let reachable: Vec<usize> = gold.targets(s).iter().flatten().copied().collect();
        match predicted.get(&s) {
            Some(&p) if !reachable.is_empty() => {
                let best = reachable
                    .iter()
                    .map(|&g| row_cosine(tgt_emb, p, g))
                    .fold(f64::NEG_INFINITY, f64::max);
                sum += best;
                evaluated += 1;
            }
            _ => skipped += 1,
        }
    }
    if evaluated == 0 {
        return Err(Error::EmptyEvaluation(
            "dictionary and gold share no evaluable source word".into(),
        ));
    }
    Ok(DictionarySimilarity {
        value: sum / evaluated as f64,
        evaluated,
        skipped,
    })
}

/// Replaces the target of `⌊fraction·|dict|⌋` uniformly chosen pairs by a
/// uniformly random target index.
pub fn corrupt_dictionary<R: Rng + ?Sized>(
    dict: &Dictionary,
    replace_fraction: f64,
    tgt_vocab_size: usize,
    rng: &mut R,
) -> Dictionary {
    let fraction = replace_fraction.clamp(0.0, 1.0);
    let n = dict.len();
    let count = ((fraction * n as f64).floor() as usize).min(n);
    let mut pairs = dict.pairs().to_vec();
    if count == 0 || tgt_vocab_size == 0 {
        return Dictionary::new(pairs);
    }
    let mut positions: Vec<usize> = sample(rng, n, count).into_vec();
    positions.sort_unstable();
    for p in positions {
        pairs[p].1 = rng.random_range(0..tgt_vocab_size);
    }
    Dictionary::new(pairs)
}

/// Symmetrized, unweighted `k`-nearest-neighbour adjacency (cosine, no self loops).
pub fn knn_adjacency(emb: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = emb.nrows();
    let k = k.min(n.saturating_sub(1));
    let unit = row_normalized(emb.clone());
    let gram = &unit * unit.transpose();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut idx: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            idx.sort_by(|&a, &b| gram[(i, b)].total_cmp(&gram[(i, a)]).then(a.cmp(&b)));
            idx.truncate(k);
            idx
        })
        .collect();
    let mut adj = DMatrix::zeros(n, n);
    for (i, ns) in neighbors.iter().enumerate() {
        for &j in ns {
            adj[(i, j)] = 1.0;
            adj[(j, i)] = 1.0;
        }
    }
    adj
}

/// Eigenvalues of `L = D − A`, descending.
pub fn laplacian_spectrum(adjacency: &DMatrix<f64>) -> Vec<f64> {
    let n = adjacency.nrows();
    let mut lap = -adjacency.clone();
    for i in 0..n {
        lap[(i, i)] += adjacency.row(i).sum();
    }
    let mut eig: Vec<f64> = SymmetricEigen::new(lap).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    eig
}

/// Smallest `k` whose largest `k` eigenvalues hold at least `energy` of the total.
pub fn spectrum_cutoff(descending: &[f64], energy: f64) -> usize {
    let total: f64 = descending.iter().sum();
    let mut acc = 0.0;
    for (i, &l) in descending.iter().enumerate() {
        acc += l;
        if acc >= energy * total {
            return i + 1;
        }
    }
    descending.len()
}

/// `Σ_{i<k} (λ₁ᵢ − λ₂ᵢ)²` over the `k = min(k₁, k₂)` leading eigenvalues.
pub fn spectral_distance(spectrum_a: &[f64], spectrum_b: &[f64]) -> f64 {
    let k = spectrum_cutoff(spectrum_a, SPECTRUM_ENERGY).min(spectrum_cutoff(spectrum_b, SPECTRUM_ENERGY));
    spectrum_a
        .iter()
        .zip(spectrum_b)
        .take(k)
        .map(|(a, b)| (a - b).powi(2))
        .sum()
}

/// Eigenvector similarity Δ between the nearest-neighbour graphs of the
/// `vocab` most frequent words of each side. Lower means more isomorphic.
pub fn eigenvector_similarity(
    src_emb: &DMatrix<f64>,
    tgt_emb: &DMatrix<f64>,
    vocab: usize,
    neighbors: usize,
) -> Result<f64> {
    for m in [src_emb, tgt_emb] {
        if vocab > m.nrows() {
            return Err(Error::VocabularyTooSmall {
                requested: vocab,
                available: m.nrows(),
            });
        }
    }
    if vocab < 2 {
        return Err(Error::TooFewRows {
            required: 2,
            found: vocab,
        });
    }
    let (a, b) = rayon::join(
        || laplacian_spectrum(&knn_adjacency(&src_emb.rows(0, vocab).into_owned(), neighbors)),
        || laplacian_spectrum(&knn_adjacency(&tgt_emb.rows(0, vocab).into_owned(), neighbors)),
    );
    Ok(spectral_distance(&a, &b))
}

/// Cosine nearest target of every source row (lowest index on ties).
pub fn nearest_neighbors(src: &DMatrix<f64>, tgt: &DMatrix<f64>) -> Vec<usize> {
    let src = row_normalized(src.clone());
    let tgt_t = row_normalized(tgt.clone()).transpose();
    let step = 512;
    let starts: Vec<usize> = (0..src.nrows()).step_by(step).collect();
    starts
        .par_iter()
        .flat_map_iter(|&start| {
            let len = step.min(src.nrows() - start);
            let block = src.rows(start, len) * &tgt_t;
            (0..len)
                .map(|r| crate::linalg::argmax(block.row(r).iter().copied()).unwrap_or(0))
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Distinct targets that are the nearest neighbour of some source, divided
/// by the number of sources. Lower values mean stronger hubs.
pub fn hubness(src_mapped: &DMatrix<f64>, tgt_mapped: &DMatrix<f64>) -> Result<f64> {
    if src_mapped.nrows() == 0 || tgt_mapped.nrows() == 0 {
        return Err(Error::TooFewRows {
            required: 1,
            found: 0,
        });
    }
    let distinct: BTreeSet<usize> = nearest_neighbors(src_mapped, tgt_mapped).into_iter().collect();
    Ok(distinct.len() as f64 / src_mapped.nrows() as f64)
}

/// Mean profile-row cosine over gold pairs inside both profile vocabularies.
pub fn oracle_structural_similarity(
    src_profile: &StructuralProfile,
    tgt_profile: &StructuralProfile,
    gold: &Dictionary,
) -> Result<f64> {
    let inside = gold.restricted(src_profile.vocab_size(), tgt_profile.vocab_size());
    if inside.is_empty() {
        return Err(Error::EmptyEvaluation(
            "no gold pair inside the initialization vocabulary".into(),
        ));
    }
    let sum: f64 = inside
        .pairs()
        .iter()
        .map(|&(s, t)| src_profile.row_cosine(s, tgt_profile, t))
        .sum();
    Ok(sum / inside.len() as f64)
}

/// Best accuracy a perfect initialization could reach on the top
/// `src_init_vocab` / `tgt_init_vocab` words.
pub fn maximum_accuracy(gold: &ResolvedGold, src_init_vocab: usize, tgt_init_vocab: usize) -> f64 {
    let sources: Vec<usize> = gold.sources().filter(|&s| s < src_init_vocab).collect();
    if sources.is_empty() {
        return 0.0;
    }
    let reachable = sources
        .iter()
        .filter(|&&s| gold.targets(s).iter().flatten().any(|&t| t < tgt_init_vocab))
        .count();
    reachable as f64 / sources.len() as f64
}

/// Flat collection of the diagnostics of one run; absent values are
/// omitted from the key-value output and left empty in CSV.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub accuracy: Option<f64>,
    pub coverage: Option<f64>,
    pub dictionary_similarity: Option<f64>,
    pub eigenvector_similarity: Option<f64>,
    /// `(dim, Δ)` for a sweep over reduced dimensions.
    pub eigenvector_similarity_by_dim: Vec<(usize, f64)>,
    pub hubness: Option<f64>,
    pub hubness_after_dropmax: Option<f64>,
    pub oracle_structural_similarity: Option<f64>,
    pub max_accuracy: Option<f64>,
    pub explained_variance_top1_src: Option<f64>,
    pub explained_variance_top1_tgt: Option<f64>,
    pub mean_cosine_src: Option<f64>,
    pub mean_cosine_tgt: Option<f64>,
    pub mean_cosine_src_after_dropmax: Option<f64>,
    pub mean_cosine_tgt_after_dropmax: Option<f64>,
    pub notes: Vec<String>,
}

impl DiagnosticsReport {
    fn fields(&self) -> Vec<(String, Option<f64>)> {
        let mut out = vec![
            ("accuracy".to_string(), self.accuracy),
            ("coverage".into(), self.coverage),
            ("dictionary_similarity".into(), self.dictionary_similarity),
            ("eigenvector_similarity".into(), self.eigenvector_similarity),
        ];
        for (dim, delta) in &self.eigenvector_similarity_by_dim {
            out.push((format!("eigenvector_similarity_dim{dim}"), Some(*delta)));
        }
        out.extend([
            ("hubness".to_string(), self.hubness),
            ("hubness_after_dropmax".into(), self.hubness_after_dropmax),
            ("oracle_structural_similarity".into(), self.oracle_structural_similarity),
            ("max_accuracy".into(), self.max_accuracy),
            ("explained_variance_top1_src".into(), self.explained_variance_top1_src),
            ("explained_variance_top1_tgt".into(), self.explained_variance_top1_tgt),
            ("mean_cosine_src".into(), self.mean_cosine_src),
            ("mean_cosine_tgt".into(), self.mean_cosine_tgt),
            ("mean_cosine_src_after_dropmax".into(), self.mean_cosine_src_after_dropmax),
            ("mean_cosine_tgt_after_dropmax".into(), self.mean_cosine_tgt_after_dropmax),
        ]);
        out
    }

    /// `key = value` lines followed by `# note` lines.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.fields() {
            if let Some(v) = v {
                let _ = writeln!(s, "{k} = {v}");
            }
        }
        for note in &self.notes {
            let _ = writeln!(s, "# {note}");
        }
        s
    }

    pub fn csv_header(&self) -> String {
        self.fields().into_iter().map(|(k, _)| k).collect::<Vec<_>>().join(",")
    }

    pub fn csv_row(&self) -> String {
        self.fields()
            .into_iter()
            .map(|(_, v)| v.map(|v| v.to_string()).unwrap_or_default())
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Every fraction lies in `[0, 1]` and Δ is non-negative.
    pub fn is_consistent(&self) -> bool {
        let fractions = [
            self.accuracy,
            self.coverage,
            self.hubness,
            self.hubness_after_dropmax,
            self.max_accuracy,
            self.explained_variance_top1_src,
            self.explained_variance_top1_tgt,
        ];
        fractions.iter().flatten().all(|v| (0.0..=1.0).contains(v))
            && self.eigenvector_similarity.is_none_or(|d| d >= 0.0)
            && self.eigenvector_similarity_by_dim.iter().all(|&(_, d)| d >= 0.0)
    }
}
