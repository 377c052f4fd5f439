//! The self-learning loop: alternate a closed-form orthogonal mapping for
//! the current dictionary with CSLS retrieval of a new dictionary, randomly
//! masking similarity scores to escape poor local optima.

use std::fmt;
use std::str::FromStr;

use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::linalg::{gather_rows, orthogonality_error, svd, top_k_mean, TopK};
use crate::preprocess::{fit_whitening, TransformChain, TransformStep};

/// Which retrieval directions contribute pairs to an induced dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
    Union,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
            Direction::Union => "union",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Direction::Forward),
            "backward" => Ok(Direction::Backward),
            "union" => Ok(Direction::Union),
            other => Err(Error::Config(format!("unknown direction {other:?}"))),
        }
    }
}

impl Direction {
    fn forward(self) -> bool {
        matches!(self, Direction::Forward | Direction::Union)
    }

    fn backward(self) -> bool {
        matches!(self, Direction::Backward | Direction::Union)
    }
}

/// Hyperparameters of the self-learning loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfLearnConfig {
    pub csls_k: usize,
    pub keep_prob_initial: f64,
    pub keep_prob_growth: f64,
    pub objective_tolerance: f64,
    pub direction: Direction,
    pub max_iterations: usize,
    pub seed: u64,
    /// Whitening, re-weighting and de-whitening around the final mapping.
    pub final_transforms: bool,
}

impl Default for SelfLearnConfig {
    fn default() -> Self {
        SelfLearnConfig {
            csls_k: 10,
            keep_prob_initial: 0.1,
            keep_prob_growth: 2.0,
            objective_tolerance: 1e-6,
            direction: Direction::Union,
            max_iterations: 10_000,
            seed: 0,
            final_transforms: true,
        }
    }
}

impl SelfLearnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.keep_prob_initial > 0.0 && self.keep_prob_initial <= 1.0) {
            return Err(Error::Config(format!(
                "keep_prob_initial must be in (0, 1], got {}",
                self.keep_prob_initial
            )));
        }
        if self.keep_prob_growth.is_nan() || self.keep_prob_growth <= 1.0 {
            return Err(Error::Config(format!(
                "keep_prob_growth must exceed 1, got {}",
                self.keep_prob_growth
            )));
        }
        if self.csls_k == 0 {
            return Err(Error::Config("csls_k must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// The whitening → rotation → re-weighting → de-whitening chains of both
/// sides, fitted at the last iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalChain {
    pub src: TransformChain,
    pub tgt: TransformChain,
    pub singular_values: DVector<f64>,
}

/// Per-language maps into the shared space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMap {
    pub w_src: DMatrix<f64>,
    pub w_tgt: DMatrix<f64>,
    pub final_chain: Option<FinalChain>,
}

impl LinearMap {
    pub fn identity(dim: usize) -> Self {
        LinearMap {
            w_src: DMatrix::identity(dim, dim),
            w_tgt: DMatrix::identity(dim, dim),
            final_chain: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.w_src.nrows()
    }

    fn check(&self, emb: &DMatrix<f64>) -> Result<()> {
        if emb.ncols() != self.dim() {
            return Err(Error::TransformDimension {
                expected: self.dim(),
                found: emb.ncols(),
            });
        }
        Ok(())
    }

    pub fn map_src(&self, emb: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(emb)?;
        match &self.final_chain {
            Some(chain) => chain.src.apply(emb),
            None => Ok(emb * &self.w_src),
        }
    }

    pub fn map_tgt(&self, emb: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(emb)?;
        match &self.final_chain {
            Some(chain) => chain.tgt.apply(emb),
            None => Ok(emb * &self.w_tgt),
        }
    }

    /// Largest deviation of either rotation from orthogonality.
    pub fn orthogonality_error(&self) -> f64 {
        orthogonality_error(&self.w_src).max(orthogonality_error(&self.w_tgt))
    }
}

/// `Σ_{(i,j)∈D} x_iᵀ y_j`, accumulated pair by pair.
pub fn cross_covariance(src: &DMatrix<f64>, tgt: &DMatrix<f64>, dict: &Dictionary) -> DMatrix<f64> {
    let xs = gather_rows(src, dict.source_indices());
    let ys = gather_rows(tgt, dict.target_indices());
    xs.transpose() * ys
}

/// Orthogonal maps maximizing `Σ_{(i,j)∈D} (x_i W_x)·(y_j W_y)`: with
/// `U S Vᵀ = XᵀDY`, `W_x = U` and `W_y = V`. Returns the maps and `diag(S)`.
pub fn procrustes_step(
    src: &DMatrix<f64>,
    tgt: &DMatrix<f64>,
    dict: &Dictionary,
) -> Result<(LinearMap, DVector<f64>)> {
    if dict.is_empty() {
        return Err(Error::EmptyDictionaryPairs);
    }
    if src.ncols() != tgt.ncols() {
        return Err(Error::TransformDimension {
            expected: src.ncols(),
            found: tgt.ncols(),
        });
    }
    dict.validate(src.nrows(), tgt.nrows())?;
    let m = cross_covariance(src, tgt, dict);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::SvdFailure);
    }
    let (u, singular, v) = svd(&m)?;
    let map = LinearMap {
        w_src: u,
        w_tgt: v,
        final_chain: None,
    };
    debug_assert!({
        let obj = mapped_objective(src, tgt, dict, &map).unwrap_or(f64::NAN);
        let nuclear = singular.sum();
        (obj - nuclear).abs() <= 1e-8 * nuclear.abs().max(1.0)
    });
    Ok((map, singular))
}

/// `Σ_{(i,j)∈D} (x_i W_x)·(y_j W_y)` under `map`.
pub fn mapped_objective(
    src: &DMatrix<f64>,
    tgt: &DMatrix<f64>,
    dict: &Dictionary,
    map: &LinearMap,
) -> Result<f64> {
    let xs = map.map_src(&gather_rows(src, dict.source_indices()))?;
    let ys = map.map_tgt(&gather_rows(tgt, dict.target_indices()))?;
    Ok(xs.component_mul(&ys).sum())
}

/// Deterministic Bernoulli mask over matrix positions.
///
/// Whether entry `(i, j)` is kept depends only on the key and the position,
/// so a blocked similarity computation sees exactly the same mask as a
/// dense one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticMask {
    key: u64,
    keep_prob: f64,
}

impl StochasticMask {
    pub fn new(key: u64, keep_prob: f64) -> Self {
        StochasticMask { key, keep_prob }
    }

    pub fn from_rng<R: RngCore + ?Sized>(rng: &mut R, keep_prob: f64) -> Self {
        StochasticMask::new(rng.next_u64(), keep_prob)
    }

    pub fn keep_prob(&self) -> f64 {
        self.keep_prob
    }

    #[inline]
    pub fn keeps(&self, i: usize, j: usize) -> bool {
        if self.keep_prob >= 1.0 {
            return true;
        }
        let pos = splitmix64(((i as u64) << 32) ^ (j as u64));
        let h = splitmix64(self.key ^ pos);
        let u = (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        u < self.keep_prob
    }

    #[inline]
    fn apply(&self, i: usize, j: usize, value: f64) -> f64 {
        if self.keeps(i, j) {
            value
        } else {
            0.0
        }
    }
}

#[inline]
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Keeps each entry with probability `keep_prob`, zeroing the rest.
pub fn stochastic_mask<R: RngCore + ?Sized>(sim: &DMatrix<f64>, keep_prob: f64, rng: &mut R) -> DMatrix<f64> {
    let mask = StochasticMask::from_rng(rng, keep_prob);
    DMatrix::from_fn(sim.nrows(), sim.ncols(), |i, j| mask.apply(i, j, sim[(i, j)]))
}

/// CSLS retrieval on a dense similarity matrix.
///
/// `CSLS(i,j) = 2·sim(i,j) − r_tgt(i) − r_src(j)` with `r_tgt(i)` the mean
/// of the `k` largest entries of row `i` and `r_src(j)` that of column `j`.
/// Forward pairs come first (one per row), then backward pairs (one per
/// column). Ties go to the lower index.
pub fn csls_retrieve(sim: &DMatrix<f64>, k: usize, direction: Direction) -> Result<Dictionary> {
    let (s, t) = sim.shape();
    let max = s.min(t);
    if k == 0 || k > max {
        return Err(Error::NeighborhoodSize { k, max });
    }
    let rows: Vec<Vec<f64>> = (0..s).map(|i| sim.row(i).iter().copied().collect()).collect();
    let r_tgt: Vec<f64> = rows.iter().map(|r| top_k_mean(r, k)).collect();
    let r_src: Vec<f64> = (0..t)
        .map(|j| top_k_mean(sim.column(j).as_slice(), k))
        .collect();
    let csls = |i: usize, j: usize| 2.0 * sim[(i, j)] - r_tgt[i] - r_src[j];

    let mut dict = Dictionary::default();
    if direction.forward() {
        for i in 0..s {
            let j = crate::linalg::argmax((0..t).map(|j| csls(i, j))).expect("non-empty");
            dict.push(i, j);
        }
    }
    if direction.backward() {
        for j in 0..t {
            let i = crate::linalg::argmax((0..s).map(|i| csls(i, j))).expect("non-empty");
            dict.push(i, j);
        }
    }
    Ok(dict)
}

/// Result of retrieval over mapped embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct Retrieval {
    pub dictionary: Dictionary,
    /// Forward match per source row (empty for backward-only retrieval).
    pub forward: Vec<usize>,
    /// Backward match per target row (empty for forward-only retrieval).
    pub backward: Vec<usize>,
    /// Mean unmasked cosine of the induced pairs of the primary direction.
    pub objective: f64,
}

const BLOCK_ELEMENTS: usize = 1 << 21;

fn row_chunks(rows: usize, cols: usize) -> Vec<std::ops::Range<usize>> {
    let step = (BLOCK_ELEMENTS / cols.max(1)).clamp(1, 1024);
    (0..rows)
        .step_by(step)
        .map(|start| start..(start + step).min(rows))
        .collect()
}

struct ColumnTops(Vec<TopK>);

impl ColumnTops {
    fn merge(mut self, other: ColumnTops) -> ColumnTops {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            for &v in b.values() {
                a.push(v);
            }
        }
        self
    }
}

/// CSLS retrieval between `src` and `tgt` rows (already mapped, cosine
/// similarity via dot products of unit rows), optionally masked.
///
/// Equivalent to [`csls_retrieve`] on `stochastic_mask(src·tgtᵀ)` but never
/// materializes the full similarity matrix.
pub fn csls_retrieve_embeddings(
    src: &DMatrix<f64>,
    tgt: &DMatrix<f64>,
    k: usize,
    direction: Direction,
    mask: Option<&StochasticMask>,
) -> Result<Retrieval> {
    let (s, t) = (src.nrows(), tgt.nrows());
    let max = s.min(t);
    if k == 0 || k > max {
        return Err(Error::NeighborhoodSize { k, max });
    }
    if src.ncols() != tgt.ncols() {
        return Err(Error::TransformDimension {
            expected: src.ncols(),
            found: tgt.ncols(),
        });
    }
    let tgt_t = tgt.transpose();
    let chunks = row_chunks(s, t);
    let masked = |i: usize, j: usize, v: f64| match mask {
        Some(m) => m.apply(i, j, v),
        None => v,
    };

    // Pass 1: neighbourhood means of rows and columns of the masked matrix.
    let (mut r_tgt_parts, col_tops) = chunks
        .par_iter()
        .map(|range| {
            let block = src.rows(range.start, range.len()) * &tgt_t;
            let mut rows = Vec::with_capacity(range.len());
            let mut tops = ColumnTops((0..t).map(|_| TopK::new(k)).collect());
            let mut buf = vec![0.0; t];
            for (bi, i) in range.clone().enumerate() {
                for j in 0..t {
                    let v = masked(i, j, block[(bi, j)]);
                    buf[j] = v;
                    tops.0[j].push(v);
                }
                rows.push((i, top_k_mean(&buf, k)));
            }
            (rows, tops)
        })
        .reduce(
            || (Vec::new(), ColumnTops((0..t).map(|_| TopK::new(k)).collect())),
            |(mut ra, ta), (rb, tb)| {
                ra.extend(rb);
                (ra, ta.merge(tb))
            },
        );
    r_tgt_parts.sort_by_key(|&(i, _)| i);
    let r_tgt: Vec<f64> = r_tgt_parts.into_iter().map(|(_, r)| r).collect();
    let r_src: Vec<f64> = col_tops.0.iter().map(TopK::mean).collect();

    // Pass 2: argmax in both directions.
    type ColBest = Vec<(f64, usize)>;
    let merge_cols = |mut a: ColBest, b: ColBest| -> ColBest {
        for (x, y) in a.iter_mut().zip(b) {
            if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) {
                *x = y;
            }
        }
        a
    };
    let (mut fwd_parts, col_best) = chunks
        .par_iter()
        .map(|range| {
            let block = src.rows(range.start, range.len()) * &tgt_t;
            let mut fwd = Vec::with_capacity(range.len());
            let mut best: ColBest = vec![(f64::NEG_INFINITY, usize::MAX); t];
            for (bi, i) in range.clone().enumerate() {
                let mut row_best = (f64::NEG_INFINITY, 0usize);
                for j in 0..t {
                    let c = 2.0 * masked(i, j, block[(bi, j)]) - r_tgt[i] - r_src[j];
                    if c > row_best.0 {
                        row_best = (c, j);
                    }
                    if c > best[j].0 {
                        best[j] = (c, i);
                    }
                }
                fwd.push((i, row_best.1, block[(bi, row_best.1)]));
            }
            (fwd, best)
        })
        .reduce(
            || (Vec::new(), vec![(f64::NEG_INFINITY, usize::MAX); t]),
            |(mut fa, ca), (fb, cb)| {
                fa.extend(fb);
                (fa, merge_cols(ca, cb))
            },
        );
    fwd_parts.sort_by_key(|&(i, _, _)| i);

    let mut dictionary = Dictionary::default();
    let mut forward = Vec::new();
    let mut backward = Vec::new();
    let mut objective = 0.0;
    if direction.forward() {
        for &(i, j, cos) in &fwd_parts {
            dictionary.push(i, j);
            forward.push(j);
            objective += cos;
        }
        objective /= s as f64;
    }
    if direction.backward() {
        let mut back_obj = 0.0;
        for (j, &(_, i)) in col_best.iter().enumerate() {
            dictionary.push(i, j);
            backward.push(i);
            back_obj += src.row(i).dot(&tgt.row(j));
        }
        if !direction.forward() {
            objective = back_obj / t as f64;
        }
    }
    Ok(Retrieval {
        dictionary,
        forward,
        backward,
        objective,
    })
}

/// One pass of the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub keep_prob: f64,
    /// Mean cosine of the induced pairs.
    pub objective: f64,
    /// `Σ diag(S) / |D|` of the Procrustes step that opened the iteration.
    pub procrustes_objective: f64,
    pub dictionary_size: usize,
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    Collapsed {
        iteration: usize,
        distinct_targets: usize,
        sources: usize,
    },
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfLearnOutcome {
    pub map: LinearMap,
    /// Dictionary induced by the last retrieval.
    pub dictionary: Dictionary,
    /// Objective of the last retrieval; used for model selection.
    pub objective: f64,
    pub trace: Vec<IterationRecord>,
    pub termination: Termination,
    /// Number of keep-probability increases.
    pub keep_prob_rounds: usize,
}

/// Runs self-learning from `seed_dict` on preprocessed (unit-row) embeddings.
pub fn self_learn(
    src: &DMatrix<f64>,
    tgt: &DMatrix<f64>,
    seed_dict: &Dictionary,
    cfg: &SelfLearnConfig,
) -> Result<SelfLearnOutcome> {
    let outcome = self_learn_lenient(src, tgt, seed_dict, cfg)?;
    match outcome.termination {
        Termination::Converged => Ok(outcome),
        Termination::MaxIterations => Err(Error::MaxIterations(cfg.max_iterations)),
        Termination::Collapsed {
            iteration,
            distinct_targets,
            sources,
        } => Err(Error::Collapse {
            iteration,
            distinct_targets,
            sources,
        }),
    }
}

fn collapsed(retrieval: &Retrieval, sources: usize, targets: usize) -> Option<(usize, usize)> {
    let (matches, count) = if !retrieval.forward.is_empty() {
        (&retrieval.forward, sources)
    } else {
        (&retrieval.backward, targets)
    };
    let distinct = matches.iter().collect::<std::collections::BTreeSet<_>>().len();
    if (distinct as f64) < 1e-3 * count as f64 || distinct == 0 {
        Some((distinct, count))
    } else {
        None
    }
}

/// Like [`self_learn`] but reports collapse and the iteration cap through
/// [`SelfLearnOutcome::termination`], returning the last valid state.
pub fn self_learn_lenient(
    src: &DMatrix<f64>,
    tgt: &DMatrix<f64>,
    seed_dict: &Dictionary,
    cfg: &SelfLearnConfig,
) -> Result<SelfLearnOutcome> {
    cfg.validate()?;
    if seed_dict.is_empty() {
        return Err(Error::EmptyDictionaryPairs);
    }
    seed_dict.validate(src.nrows(), tgt.nrows())?;
    let k = cfg.csls_k.min(src.nrows()).min(tgt.nrows());

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dict = seed_dict.clone();
    let mut keep_prob = cfg.keep_prob_initial;
    let mut best = f64::NEG_INFINITY;
    let mut trace = Vec::new();
    let mut rounds = 0;
    let mut termination = Termination::MaxIterations;
    let mut last_map = None;
    let mut last_objective = f64::NEG_INFINITY;

    for iteration in 1..=cfg.max_iterations {
        let (map, singular) = procrustes_step(src, tgt, &dict)?;
        let xw = src * &map.w_src;
        let zw = tgt * &map.w_tgt;
        let mask = StochasticMask::from_rng(&mut rng, keep_prob);
        let mask = (keep_prob < 1.0).then_some(mask);
        let retrieval = csls_retrieve_embeddings(&xw, &zw, k, cfg.direction, mask.as_ref())?;
        if let Some((distinct, sources)) = collapsed(&retrieval, src.nrows(), tgt.nrows()) {
            debug!("collapse at iteration {iteration}: {distinct} distinct of {sources}");
            return Ok(SelfLearnOutcome {
                map,
                dictionary: dict,
                objective: last_objective,
                trace,
                termination: Termination::Collapsed {
                    iteration,
                    distinct_targets: distinct,
                    sources,
                },
                keep_prob_rounds: rounds,
            });
        }
        trace.push(IterationRecord {
            iteration,
            keep_prob,
            objective: retrieval.objective,
            procrustes_objective: singular.sum() / dict.len() as f64,
            dictionary_size: retrieval.dictionary.len(),
        });
        debug!(
            "iteration {iteration}: keep_prob {keep_prob:.4} objective {:.6}",
            retrieval.objective
        );
        last_objective = retrieval.objective;
        dict = retrieval.dictionary;
        last_map = Some(map);

        if retrieval.objective - best >= cfg.objective_tolerance {
            best = retrieval.objective;
        } else if keep_prob >= 1.0 {
            termination = Termination::Converged;
            break;
        } else {
            keep_prob = (keep_prob * cfg.keep_prob_growth).min(1.0);
            rounds += 1;
        }
    }

    let mut map = last_map.expect("at least one iteration");
    let mut objective = last_objective;
    if termination == Termination::Converged {
        let (final_map, retrieval) = if cfg.final_transforms {
            let final_map = final_mapping(src, tgt, &dict)?;
            let xw = final_map.map_src(src)?;
            let zw = final_map.map_tgt(tgt)?;
            let retrieval = csls_retrieve_embeddings(
                &row_normalized(xw),
                &row_normalized(zw),
                k,
                cfg.direction,
                None,
            )?;
            (final_map, retrieval)
        } else {
            let (final_map, _) = procrustes_step(src, tgt, &dict)?;
            let retrieval = csls_retrieve_embeddings(
                &(src * &final_map.w_src),
                &(tgt * &final_map.w_tgt),
                k,
                cfg.direction,
                None,
            )?;
            (final_map, retrieval)
        };
        map = final_map;
        objective = retrieval.objective;
        dict = retrieval.dictionary;
    }

    Ok(SelfLearnOutcome {
        map,
        dictionary: dict,
        objective,
        trace,
        termination,
        keep_prob_rounds: rounds,
    })
}

/// Whitening, orthogonal mapping, symmetric re-weighting and de-whitening,
/// each side fitted on its dictionary rows.
pub fn final_mapping(src: &DMatrix<f64>, tgt: &DMatrix<f64>, dict: &Dictionary) -> Result<LinearMap> {
    if dict.is_empty() {
        return Err(Error::EmptyDictionaryPairs);
    }
    dict.validate(src.nrows(), tgt.nrows())?;
    let wx = fit_whitening(&gather_rows(src, dict.source_indices()))?;
    let wz = fit_whitening(&gather_rows(tgt, dict.target_indices()))?;
    let xw = wx.apply(src)?;
    let zw = wz.apply(tgt)?;
    let (rotation, singular) = procrustes_step(&xw, &zw, dict)?;

    let mut src_chain = TransformChain::new();
    src_chain.push(TransformStep::Whiten(wx.clone()))?;
    src_chain.push(TransformStep::Rotate(rotation.w_src.clone()))?;
    src_chain.push(TransformStep::Reweight(singular.clone()))?;
    src_chain.push(TransformStep::Dewhiten {
        whitening: wx,
        rotation: rotation.w_src.clone(),
    })?;
    let mut tgt_chain = TransformChain::new();
    tgt_chain.push(TransformStep::Whiten(wz.clone()))?;
    tgt_chain.push(TransformStep::Rotate(rotation.w_tgt.clone()))?;
    tgt_chain.push(TransformStep::Reweight(singular.clone()))?;
    tgt_chain.push(TransformStep::Dewhiten {
        whitening: wz,
        rotation: rotation.w_tgt.clone(),
    })?;

    Ok(LinearMap {
        w_src: rotation.w_src,
        w_tgt: rotation.w_tgt,
        final_chain: Some(FinalChain {
            src: src_chain,
            tgt: tgt_chain,
            singular_values: singular,
        }),
    })
}

/// Copies `m` with every non-zero row scaled to unit length.
pub fn row_normalized(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for mut row in m.row_iter_mut() {
        let n = row.norm();
        if n > 0.0 {
            row.unscale_mut(n);
        }
    }
    m
}
