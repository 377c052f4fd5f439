//! Iterative dimension reduction: solve the alignment in a low-dimensional
//! PCA space, carry the translations of the most frequent words over as the
//! seed dictionary of the next, larger dimension, and finish at the raw
//! dimension. Also hosts the plain single-space pipeline and multi-seed
//! model selection.

use std::time::Instant;

use log::info;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::embedding_io::{EmbeddingMatrix, ResolvedGold};
use crate::error::{Error, Result};
use crate::init::{build_profile, init_dictionary};
use crate::metrics::accuracy_p1;
use crate::preprocess::normalize_center_normalize;
use crate::reduction::{fit_pca, project, PcaModel};
use crate::self_learning::{
    csls_retrieve_embeddings, row_normalized, self_learn_lenient, Direction, LinearMap, SelfLearnConfig,
    SelfLearnOutcome, Termination,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdrConfig {
    pub initial_dim: usize,
    pub dim_growth: usize,
    /// `None` means the raw embedding dimension.
    pub max_dim: Option<usize>,
    pub bridge_vocab: usize,
    /// Number of most frequent words whose similarity profiles seed the
    /// unsupervised initialization.
    pub init_vocab: usize,
    pub dropmax: bool,
    /// `false` runs a single step at the largest admissible dimension.
    pub iterative: bool,
    pub num_seeds: usize,
    pub self_learn: SelfLearnConfig,
}

impl Default for IdrConfig {
    fn default() -> Self {
        IdrConfig {
            initial_dim: 50,
            dim_growth: 2,
            max_dim: None,
            bridge_vocab: 4000,
            init_vocab: 4000,
            dropmax: true,
            iterative: true,
            num_seeds: 3,
            self_learn: SelfLearnConfig::default(),
        }
    }
}

impl IdrConfig {
    pub fn validate(&self, raw_dim: usize, src_vocab: usize) -> Result<()> {
        self.self_learn.validate()?;
        if self.initial_dim < 2 {
            return Err(Error::Config(format!("initial_dim must be >= 2, got {}", self.initial_dim)));
        }
        if self.dim_growth < 2 {
            return Err(Error::Config(format!("dim_growth must be >= 2, got {}", self.dim_growth)));
        }
        if let Some(m) = self.max_dim {
            if m < 2 || m > raw_dim {
                return Err(Error::Config(format!("max_dim {m} outside [2, {raw_dim}]")));
            }
        }
        if self.bridge_vocab == 0 || self.bridge_vocab > src_vocab {
            return Err(Error::Config(format!(
                "bridge_vocab {} outside [1, {src_vocab}]",
                self.bridge_vocab
            )));
        }
        if self.init_vocab < 2 {
            return Err(Error::Config("init_vocab must be >= 2".into()));
        }
        if self.num_seeds == 0 {
            return Err(Error::Config("num_seeds must be positive".into()));
        }
        Ok(())
    }
}

/// One dimension of the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimStep {
    pub dim: usize,
    /// `false` when the step runs on the raw preprocessed embeddings.
    pub reduced: bool,
    pub dropmax: bool,
}

/// `n, g·n, g²·n, …` capped at the maximum dimension, which is visited
/// exactly once. At the raw dimension no reduction is applied.
pub fn dimension_schedule(cfg: &IdrConfig, raw_dim: usize) -> Vec<DimStep> {
    let max = cfg.max_dim.unwrap_or(raw_dim).min(raw_dim);
    let step = |dim: usize| DimStep {
        dim,
        reduced: dim < raw_dim,
        dropmax: cfg.dropmax && dim < raw_dim,
    };
    if !cfg.iterative {
        // Dropmax needs one spare component, so at the raw dimension the
        // single step runs one dimension lower.
        let dim = if cfg.dropmax && max == raw_dim { raw_dim - 1 } else { max };
        return vec![DimStep {
            dim,
            reduced: dim < raw_dim,
            dropmax: cfg.dropmax,
        }];
    }
    let mut dims = Vec::new();
    let mut n = cfg.initial_dim;
    while n < max {
        dims.push(step(n));
        n = n.saturating_mul(cfg.dim_growth);
    }
    dims.push(step(max));
    dims
}

/// Both languages preprocessed, with one PCA model per language fitted on
/// the preprocessed embeddings.
#[derive(Debug, Clone)]
pub struct PreparedPair {
    pub src: DMatrix<f64>,
    pub tgt: DMatrix<f64>,
    src_pca: Option<PcaModel>,
    tgt_pca: Option<PcaModel>,
}

impl PreparedPair {
    pub fn new(src_raw: &DMatrix<f64>, tgt_raw: &DMatrix<f64>) -> Result<Self> {
        if src_raw.ncols() != tgt_raw.ncols() {
            return Err(Error::TransformDimension {
                expected: src_raw.ncols(),
                found: tgt_raw.ncols(),
            });
        }
        Ok(PreparedPair {
            src: normalize_center_normalize(src_raw)?,
            tgt: normalize_center_normalize(tgt_raw)?,
            src_pca: None,
            tgt_pca: None,
        })
    }

    pub fn raw_dim(&self) -> usize {
        self.src.ncols()
    }

    fn ensure_pca(&mut self) -> Result<()> {
        if self.src_pca.is_none() {
            let (a, b) = rayon::join(|| fit_pca(&self.src), || fit_pca(&self.tgt));
            self.src_pca = Some(a?);
            self.tgt_pca = Some(b?);
        }
        Ok(())
    }

    /// Fits the PCA models needed by `schedule` (no-op when no step reduces).
    pub fn prepare_schedule(&mut self, schedule: &[DimStep]) -> Result<()> {
        if schedule.iter().any(|s| s.reduced) {
            self.ensure_pca()?;
        }
        Ok(())
    }

    /// Embeddings of one step: projected and re-preprocessed, or the raw
    /// preprocessed embeddings.
    pub fn at(&self, step: &DimStep) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if !step.reduced {
            return Ok((self.src.clone(), self.tgt.clone()));
        }
        let (Some(sp), Some(tp)) = (&self.src_pca, &self.tgt_pca) else {
            return Err(Error::Config("PCA models not fitted for a reduced step".into()));
        };
        let x = normalize_center_normalize(&project(sp, &self.src, step.dim, step.dropmax)?)?;
        let z = normalize_center_normalize(&project(tp, &self.tgt, step.dim, step.dropmax)?)?;
        Ok((x, z))
    }
}

/// Unsupervised seed dictionary from the structural profiles of the
/// `init_vocab` most frequent words of each side.
pub fn unsupervised_seed(src: &DMatrix<f64>, tgt: &DMatrix<f64>, init_vocab: usize) -> Result<Dictionary> {
    let ns = init_vocab.min(src.nrows());
    let nt = init_vocab.min(tgt.nrows());
    let (a, b) = rayon::join(
        || build_profile(&src.rows(0, ns).into_owned()),
        || build_profile(&tgt.rows(0, nt).into_owned()),
    );
    init_dictionary(&a?, &b?)
}

/// Unsupervised initialization followed by self-learning on preprocessed
/// embeddings.
pub fn vecmap_run(
    src: &DMatrix<f64>,
    tgt: &DMatrix<f64>,
    init_vocab: usize,
    cfg: &SelfLearnConfig,
) -> Result<SelfLearnOutcome> {
    let seed = unsupervised_seed(src, tgt, init_vocab)?;
    self_learn_lenient(src, tgt, &seed, cfg)
}

/// Forward CSLS translations of the `k_words` most frequent source words
/// over the full target vocabulary. The neighbourhood terms use every row
/// of both sides.
pub fn translate_topk(
    map: &LinearMap,
    src: &DMatrix<f64>,
    tgt: &DMatrix<f64>,
    k_words: usize,
    csls_k: usize,
) -> Result<Dictionary> {
    if k_words == 0 || k_words > src.nrows() {
        return Err(Error::VocabularyTooSmall {
            requested: k_words,
            available: src.nrows(),
        });
    }
    let forward = forward_translations(map, src, tgt, csls_k)?;
    Ok(forward.into_iter().take(k_words).enumerate().collect())
}

/// Forward CSLS match of every source row under `map` (cosine retrieval).
pub fn forward_translations(
    map: &LinearMap,
    src: &DMatrix<f64>,
    tgt: &DMatrix<f64>,
    csls_k: usize,
) -> Result<Vec<usize>> {
    let xw = row_normalized(map.map_src(src)?);
    let zw = row_normalized(map.map_tgt(tgt)?);
    let k = csls_k.min(xw.nrows()).min(zw.nrows());
    Ok(csls_retrieve_embeddings(&xw, &zw, k, Direction::Forward, None)?.forward)
}

/// One row of the per-dimension trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub dim: usize,
    pub reduced: bool,
    pub dropmax: bool,
    pub seeded_from_bridge: bool,
    pub objective: f64,
    pub iterations: usize,
    pub keep_prob_rounds: usize,
    pub wall_seconds: f64,
    pub termination: Termination,
    pub accuracy: Option<f64>,
}

impl StepRecord {
    pub fn failed(&self) -> bool {
        self.termination != Termination::Converged
    }
}

pub const STEP_TRACE_HEADER: &str =
    "dim,reduced,dropmax,seeded_from_bridge,objective,iterations,keep_prob_rounds,wall_seconds,status,accuracy";

/// Step trace as CSV (header plus one row per step). Wall times are
/// omitted when `with_timing` is false so the output is reproducible.
pub fn step_trace_csv(steps: &[StepRecord], with_timing: bool) -> String {
    let mut out = String::from(STEP_TRACE_HEADER);
    out.push('\n');
    for s in steps {
        let status = match s.termination {
            Termination::Converged => "converged",
            Termination::Collapsed { .. } => "collapsed",
            Termination::MaxIterations => "max_iterations",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            s.dim,
            s.reduced,
            s.dropmax,
            s.seeded_from_bridge,
            s.objective,
            s.iterations,
            s.keep_prob_rounds,
            if with_timing { format!("{:.3}", s.wall_seconds) } else { String::new() },
            status,
            s.accuracy.map(|a| a.to_string()).unwrap_or_default(),
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct IdrOutcome {
    /// Map of the last step, acting on the raw preprocessed embeddings when
    /// the last step is unreduced.
    pub map: LinearMap,
    pub dictionary: Dictionary,
    pub objective: f64,
    pub steps: Vec<StepRecord>,
    pub seed: u64,
    /// Source and target embeddings the final map applies to.
    pub final_src: DMatrix<f64>,
    pub final_tgt: DMatrix<f64>,
}

/// Runs the schedule on a prepared pair with `cfg.self_learn.seed`. When
/// `gold` is given, every step records its P@1.
pub fn idr_run_prepared(
    pair: &PreparedPair,
    cfg: &IdrConfig,
    gold: Option<&ResolvedGold>,
) -> Result<IdrOutcome> {
    run_schedule(pair, cfg, None, gold)
}

/// Runs the schedule; a `seed_dict` replaces the unsupervised
/// initialization of the first step.
pub fn run_schedule(
    pair: &PreparedPair,
    cfg: &IdrConfig,
    seed_dict: Option<&Dictionary>,
    gold: Option<&ResolvedGold>,
) -> Result<IdrOutcome> {
    let raw = pair.raw_dim();
    cfg.validate(raw, pair.src.nrows())?;
    let schedule = dimension_schedule(cfg, raw);
    let mut bridged: Option<Dictionary> = seed_dict.cloned();
    let mut steps = Vec::with_capacity(schedule.len());
    let mut last = None;

    for step in &schedule {
        let start = Instant::now();
        let (x, z) = pair.at(step)?;
        let seeded_from_bridge = bridged.is_some() && !steps.is_empty();
        let outcome = match &bridged {
            None => vecmap_run(&x, &z, cfg.init_vocab, &cfg.self_learn)?,
            Some(d) => self_learn_lenient(&x, &z, d, &cfg.self_learn)?,
        };
        let forward = forward_translations(&outcome.map, &x, &z, cfg.self_learn.csls_k)?;
        let accuracy = match gold {
            Some(g) => Some(accuracy_p1(&forward.iter().copied().enumerate().collect(), g)?),
            None => None,
        };
        bridged = Some(forward.iter().copied().take(cfg.bridge_vocab).enumerate().collect());
        let record = StepRecord {
            dim: step.dim,
            reduced: step.reduced,
            dropmax: step.dropmax,
            seeded_from_bridge,
            objective: outcome.objective,
            iterations: outcome.trace.len(),
            keep_prob_rounds: outcome.keep_prob_rounds,
            wall_seconds: start.elapsed().as_secs_f64(),
            termination: outcome.termination,
            accuracy,
        };
        info!(
            "seed {} dim {}: objective {:.6}, {} iterations, {:?}",
            cfg.self_learn.seed, step.dim, record.objective, record.iterations, record.termination
        );
        steps.push(record);
        last = Some((outcome, x, z));
    }

    let (outcome, final_src, final_tgt) = last.expect("schedule is never empty");
    Ok(IdrOutcome {
        map: outcome.map,
        dictionary: outcome.dictionary,
        objective: outcome.objective,
        steps,
        seed: cfg.self_learn.seed,
        final_src,
        final_tgt,
    })
}

/// Preprocesses both sides and runs the schedule once.
pub fn idr_run(src_raw: &EmbeddingMatrix, tgt_raw: &EmbeddingMatrix, cfg: &IdrConfig) -> Result<IdrOutcome> {
    let mut pair = PreparedPair::new(src_raw.vectors(), tgt_raw.vectors())?;
    pair.prepare_schedule(&dimension_schedule(cfg, pair.raw_dim()))?;
    idr_run_prepared(&pair, cfg, None)
}

/// Index of the run with the largest objective; ties go to the earliest run.
pub fn select_best(objectives: &[f64]) -> Result<usize> {
    let mut best: Option<usize> = None;
    for (i, &o) in objectives.iter().enumerate() {
        if best.is_none_or(|b| o.total_cmp(&objectives[b]).is_gt()) {
            best = Some(i);
        }
    }
    best.ok_or(Error::NoRuns)
}

/// Map of the run with the largest objective (runs ordered by seed).
pub fn select_model(runs: &[(LinearMap, f64)]) -> Result<&LinearMap> {
    let objectives: Vec<f64> = runs.iter().map(|(_, o)| *o).collect();
    Ok(&runs[select_best(&objectives)?].0)
}

/// Result of several seeds: every run plus the index of the selected one.
#[derive(Debug, Clone)]
pub struct MultiSeedOutcome {
    pub runs: Vec<IdrOutcome>,
    pub selected: usize,
}

impl MultiSeedOutcome {
    pub fn best(&self) -> &IdrOutcome {
        &self.runs[self.selected]
    }
}

/// Runs seeds `cfg.self_learn.seed + s` for `s < num_seeds` in parallel and
/// selects by objective.
pub fn idr_multi_seed(pair: &PreparedPair, cfg: &IdrConfig, gold: Option<&ResolvedGold>) -> Result<MultiSeedOutcome> {
    multi_seed(pair, cfg, None, gold)
}

/// [`idr_multi_seed`] with an optional seed dictionary for the first step.
pub fn multi_seed(
    pair: &PreparedPair,
    cfg: &IdrConfig,
    seed_dict: Option<&Dictionary>,
    gold: Option<&ResolvedGold>,
) -> Result<MultiSeedOutcome> {
    let runs: Vec<IdrOutcome> = (0..cfg.num_seeds as u64)
        .into_par_iter()
        .map(|s| {
            let mut c = cfg.clone();
            c.self_learn.seed = cfg.self_learn.seed.wrapping_add(s);
            run_schedule(pair, &c, seed_dict, gold)
        })
        .collect::<Result<_>>()?;
    let objectives: Vec<f64> = runs.iter().map(|r| r.objective).collect();
    let selected = select_best(&objectives)?;
    Ok(MultiSeedOutcome { runs, selected })
}
