//! The `idrmap` command line: `train`, `evaluate`, `diagnose` and `synth`.
//!
//! Values resolve as command-line flag, then config file (`key = value`
//! lines), then built-in default. Every `train` run writes the resolved
//! configuration back out so it can be replayed with `--config`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Display;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dictionary::Dictionary;
use crate::embedding_io::{load_embeddings, load_gold_pairs, save_dictionary, save_embeddings, EmbeddingMatrix};
use crate::error::{self, Error};
use crate::idr::{
    dimension_schedule, forward_translations, multi_seed, step_trace_csv, DimStep, IdrConfig, IdrOutcome,
    PreparedPair, StepRecord,
};
use crate::init::build_profile;
use crate::metrics::{
    accuracy_p1, dictionary_similarity, eigenvector_similarity, hubness, maximum_accuracy,
    oracle_structural_similarity, DiagnosticsReport, DEFAULT_GRAPH_NEIGHBORS,
};
use crate::preprocess::normalize_center_normalize;
use crate::reduction::{explained_variance_top1, fit_pca, mean_pairwise_cosine, project, DEFAULT_COSINE_SAMPLE};
use crate::self_learning::{row_normalized, Direction, LinearMap, SelfLearnConfig, Termination};
use crate::synthbench::{generate_pair, SynthSpec};

/// Environment variable holding the number of worker threads.
pub const WORKERS_ENV: &str = "IDRMAP_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "idrmap", version, about = "Unsupervised bilingual dictionary induction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a mapping and induce a dictionary.
    Train(TrainArgs),
    /// Score induced dictionaries or mapped embeddings against a gold dictionary.
    Evaluate(EvaluateArgs),
    /// Compute embedding and isomorphism diagnostics.
    Diagnose(DiagnoseArgs),
    /// Write a synthetic embedding pair and its gold dictionary.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Iterative dimension reduction.
    Idr,
    /// Unsupervised initialization and self-learning at the raw dimension.
    Vecmap,
    /// Self-learning from a given seed dictionary at the raw dimension.
    Seeded,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> error::Result<Self> {
        Mode::from_str_ci(s)
    }
}

impl Mode {
    fn from_str_ci(s: &str) -> error::Result<Self> {
        <Mode as ValueEnum>::from_str(s, true).map_err(|_| Error::Config(format!("unknown mode {s:?}")))
    }

    fn as_str(self) -> &'static str {
        match self {
            Mode::Idr => "idr",
            Mode::Vecmap => "vecmap",
            Mode::Seeded => "seeded",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub src_emb: Option<PathBuf>,
    #[arg(long)]
    pub tgt_emb: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Seed dictionary for `--mode seeded`.
    #[arg(long)]
    pub seed_dict: Option<PathBuf>,
    /// Gold dictionary used to report per-step and final accuracy.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Plain PCA instead of dropping the first component.
    #[arg(long)]
    pub no_dropmax: bool,
    /// Single step at the largest admissible dimension.
    #[arg(long)]
    pub no_idr: bool,
    #[arg(long)]
    pub init_dim: Option<usize>,
    #[arg(long)]
    pub dim_growth: Option<usize>,
    #[arg(long)]
    pub max_dim: Option<usize>,
    #[arg(long)]
    pub bridge_k: Option<usize>,
    /// Most frequent words kept from each embedding file.
    #[arg(long)]
    pub vocab: Option<usize>,
    #[arg(long)]
    pub init_vocab: Option<usize>,
    /// Number of seeds run in parallel; the best objective is kept.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// First seed; run `s` uses `seed + s`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub csls_k: Option<usize>,
    #[arg(long)]
    pub keep_prob: Option<f64>,
    #[arg(long)]
    pub keep_prob_growth: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub direction: Option<Direction>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Skip whitening, re-weighting and de-whitening after convergence.
    #[arg(long)]
    pub no_final_transforms: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Fully resolved `train` configuration, recorded in every manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub src_emb: PathBuf,
    pub tgt_emb: PathBuf,
    pub mode: Mode,
    pub seed_dict: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub dropmax: bool,
    pub idr: bool,
    pub init_dim: usize,
    pub dim_growth: usize,
    pub max_dim: Option<usize>,
    pub bridge_k: usize,
    pub vocab: usize,
    pub init_vocab: usize,
    pub seeds: usize,
    pub seed: u64,
    pub csls_k: usize,
    pub keep_prob: f64,
    pub keep_prob_growth: f64,
    pub tolerance: f64,
    pub direction: Direction,
    pub max_iterations: usize,
    pub final_transforms: bool,
    pub out: PathBuf,
}

/// Parsed `key = value` config file. Keys are consumed as they are read so
/// that leftovers can be reported as unknown.
struct ConfigFile {
    path: PathBuf,
    values: HashMap<String, String>,
}

impl ConfigFile {
    fn empty() -> Self {
        ConfigFile {
            path: PathBuf::new(),
            values: HashMap::new(),
        }
    }

    fn load(path: &Path) -> error::Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut values = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("{}:{}: expected key = value", path.display(), i + 1)));
            };
            values.insert(k.trim().replace('-', "_"), v.trim().to_string());
        }
        Ok(ConfigFile {
            path: path.to_path_buf(),
            values,
        })
    }

    fn take<T: FromStr>(&mut self, key: &str) -> error::Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.values.remove(key) {
            None => Ok(None),
            Some(v) if v.is_empty() || v == "none" => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| {
                Error::Config(format!("{}: bad value {v:?} for {key}: {e}", self.path.display()))
            }),
        }
    }

    fn finish(self) -> error::Result<()> {
        let mut unknown: Vec<_> = self.values.into_keys().collect();
        if unknown.is_empty() {
            return Ok(());
        }
        unknown.sort();
        Err(Error::Config(format!(
            "{}: unknown keys {}",
            self.path.display(),
            unknown.join(", ")
        )))
    }
}

/// Failure of a command: a usage problem (reported with the usage text) or
/// a pipeline error.
#[derive(Debug)]
pub enum CliError {
    Usage(clap::Error),
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn missing(subcommand: &str, flag: &str) -> CliError {
    let mut cmd = Cli::command();
    let mut sub = cmd
        .find_subcommand_mut(subcommand)
        .expect("known subcommand")
        .clone()
        .bin_name(format!("idrmap {subcommand}"));
    CliError::Usage(sub.error(
        ErrorKind::MissingRequiredArgument,
        format!("the following required argument was not provided: --{flag}"),
    ))
}

impl TrainArgs {
    /// Applies flag > config file > default precedence.
    pub fn resolve(&self) -> CliResult<TrainConfig> {
        let mut file = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::empty(),
        };
        let d = SelfLearnConfig::default();
        let i = IdrConfig::default();
        macro_rules! pick {
            ($flag:expr, $key:literal, $default:expr) => {{
                let from_file = file.take($key)?;
                $flag.clone().or(from_file).unwrap_or($default)
            }};
        }
        macro_rules! pick_opt {
            ($flag:expr, $key:literal) => {{
                let from_file = file.take($key)?;
                $flag.clone().or(from_file)
            }};
        }
        let src_emb: Option<PathBuf> = pick_opt!(self.src_emb, "src_emb");
        let tgt_emb: Option<PathBuf> = pick_opt!(self.tgt_emb, "tgt_emb");
        let file_dropmax: Option<bool> = file.take("dropmax")?;
        let file_idr: Option<bool> = file.take("idr")?;
        let file_final: Option<bool> = file.take("final_transforms")?;
        let mode_text: Option<String> = file.take("mode")?;
        let file_mode = mode_text.map(|m| Mode::from_str_ci(&m)).transpose()?;
        let cfg = TrainConfig {
            mode: self.mode.or(file_mode).unwrap_or(Mode::Idr),
            seed_dict: pick_opt!(self.seed_dict, "seed_dict"),
            gold: pick_opt!(self.gold, "gold"),
            dropmax: if self.no_dropmax { false } else { file_dropmax.unwrap_or(i.dropmax) },
            idr: if self.no_idr { false } else { file_idr.unwrap_or(i.iterative) },
            init_dim: pick!(self.init_dim, "init_dim", i.initial_dim),
            dim_growth: pick!(self.dim_growth, "dim_growth", i.dim_growth),
            max_dim: pick_opt!(self.max_dim, "max_dim"),
            bridge_k: pick!(self.bridge_k, "bridge_k", i.bridge_vocab),
            vocab: pick!(self.vocab, "vocab", 20_000),
            init_vocab: pick!(self.init_vocab, "init_vocab", i.init_vocab),
            seeds: pick!(self.seeds, "seeds", i.num_seeds),
            seed: pick!(self.seed, "seed", d.seed),
            csls_k: pick!(self.csls_k, "csls_k", d.csls_k),
            keep_prob: pick!(self.keep_prob, "keep_prob", d.keep_prob_initial),
            keep_prob_growth: pick!(self.keep_prob_growth, "keep_prob_growth", d.keep_prob_growth),
            tolerance: pick!(self.tolerance, "tolerance", d.objective_tolerance),
            direction: pick!(self.direction, "direction", d.direction),
            max_iterations: pick!(self.max_iterations, "max_iterations", d.max_iterations),
            final_transforms: if self.no_final_transforms {
                false
            } else {
                file_final.unwrap_or(d.final_transforms)
            },
            out: pick!(self.out, "out", PathBuf::from("idrmap-out")),
            src_emb: src_emb.ok_or_else(|| missing("train", "src-emb"))?,
            tgt_emb: tgt_emb.ok_or_else(|| missing("train", "tgt-emb"))?,
        };
        file.finish()?;
        if cfg.mode == Mode::Seeded && cfg.seed_dict.is_none() {
            return Err(missing("train", "seed-dict"));
        }
        Ok(cfg)
    }
}

impl TrainConfig {
    /// The configuration in config-file syntax.
    pub fn to_config_text(&self) -> String {
        fn opt<T: Display>(v: &Option<T>) -> String {
            v.as_ref().map(|v| v.to_string()).unwrap_or_else(|| "none".into())
        }
        fn path(p: &Option<PathBuf>) -> String {
            opt(&p.as_ref().map(|p| p.display()))
        }
        let lines = [
            ("src_emb", self.src_emb.display().to_string()),
            ("tgt_emb", self.tgt_emb.display().to_string()),
            ("mode", self.mode.as_str().to_string()),
            ("seed_dict", path(&self.seed_dict)),
            ("gold", path(&self.gold)),
            ("dropmax", self.dropmax.to_string()),
            ("idr", self.idr.to_string()),
            ("init_dim", self.init_dim.to_string()),
            ("dim_growth", self.dim_growth.to_string()),
            ("max_dim", opt(&self.max_dim)),
            ("bridge_k", self.bridge_k.to_string()),
            ("vocab", self.vocab.to_string()),
            ("init_vocab", self.init_vocab.to_string()),
            ("seeds", self.seeds.to_string()),
            ("seed", self.seed.to_string()),
            ("csls_k", self.csls_k.to_string()),
            ("keep_prob", self.keep_prob.to_string()),
            ("keep_prob_growth", self.keep_prob_growth.to_string()),
            ("tolerance", self.tolerance.to_string()),
            ("direction", self.direction.to_string()),
            ("max_iterations", self.max_iterations.to_string()),
            ("final_transforms", self.final_transforms.to_string()),
            ("out", self.out.display().to_string()),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Library configuration for `raw_dim`-dimensional inputs with
    /// `src_vocab` source words.
    pub fn idr_config(&self, raw_dim: usize, src_vocab: usize) -> IdrConfig {
        let self_learn = SelfLearnConfig {
            csls_k: self.csls_k,
            keep_prob_initial: self.keep_prob,
            keep_prob_growth: self.keep_prob_growth,
            objective_tolerance: self.tolerance,
            direction: self.direction,
            max_iterations: self.max_iterations,
            seed: self.seed,
            final_transforms: self.final_transforms,
        };
        let bridge_vocab = self.bridge_k.min(src_vocab);
        match self.mode {
            Mode::Idr => IdrConfig {
                initial_dim: self.init_dim,
                dim_growth: self.dim_growth,
                max_dim: self.max_dim,
                bridge_vocab,
                init_vocab: self.init_vocab,
                dropmax: self.dropmax,
                iterative: self.idr,
                num_seeds: self.seeds,
                self_learn,
            },
            // A single unreduced step at the raw dimension.
            Mode::Vecmap | Mode::Seeded => IdrConfig {
                initial_dim: raw_dim,
                dim_growth: self.dim_growth,
                max_dim: None,
                bridge_vocab,
                init_vocab: self.init_vocab,
                dropmax: false,
                iterative: true,
                num_seeds: self.seeds,
                self_learn,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub objective: f64,
    pub termination: Termination,
    pub steps: Vec<StepRecord>,
}

/// Everything needed to reproduce and audit a `train` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: TrainConfig,
    pub inputs: Vec<InputHash>,
    pub seeds: Vec<u64>,
    pub selected_seed: u64,
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    pub raw_dim: usize,
    pub schedule: Vec<DimStep>,
    pub runs: Vec<RunSummary>,
    pub metrics: BTreeMap<String, f64>,
    pub timings: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> error::Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    io::copy(&mut file, &mut hasher).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(hasher.finalize()))
}

fn write_text(path: &Path, text: &str) -> error::Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

const NOTES: [&str; 5] = [
    "stochastic dictionary induction masks similarities before the CSLS neighbourhood terms are computed",
    "re-weighted embeddings are not renormalized; retrieval compares cosines",
    "structural profiles are row-normalized only",
    "one PCA model per language is fitted once and sliced per dimension",
    "the returned map belongs to the final dimension only",
];

fn run_train(args: &TrainArgs) -> CliResult<()> {
    let cfg = args.resolve()?;
    let total = Instant::now();
    let mut timings = BTreeMap::new();

    let src = load_embeddings(&cfg.src_emb, Some(cfg.vocab))?;
    let tgt = load_embeddings(&cfg.tgt_emb, Some(cfg.vocab))?;
    if src.dim() != tgt.dim() {
        return Err(Error::TransformDimension {
            expected: src.dim(),
            found: tgt.dim(),
        }
        .into());
    }
    let mut inputs = vec![
        InputHash {
            path: cfg.src_emb.clone(),
            sha256: sha256_file(&cfg.src_emb)?,
        },
        InputHash {
            path: cfg.tgt_emb.clone(),
            sha256: sha256_file(&cfg.tgt_emb)?,
        },
    ];
    let gold = match &cfg.gold {
        Some(p) => {
            inputs.push(InputHash {
                path: p.clone(),
                sha256: sha256_file(p)?,
            });
            Some(load_gold_pairs(p)?.resolve(&src, &tgt))
        }
        None => None,
    };
    let seed_dict = match (&cfg.mode, &cfg.seed_dict) {
        (Mode::Seeded, Some(p)) => {
            inputs.push(InputHash {
                path: p.clone(),
                sha256: sha256_file(p)?,
            });
            let d = load_gold_pairs(p)?.resolve(&src, &tgt).dictionary();
            if d.is_empty() {
                return Err(Error::EmptyDictionaryPairs.into());
            }
            Some(d)
        }
        _ => None,
    };
    timings.insert("load_seconds".to_string(), total.elapsed().as_secs_f64());

    let idr_cfg = cfg.idr_config(src.dim(), src.vocab_size());
    if cfg.mode == Mode::Idr && cfg.bridge_k > src.vocab_size() {
        warn!("bridge_k {} exceeds the source vocabulary; using {}", cfg.bridge_k, src.vocab_size());
    }
    let schedule = dimension_schedule(&idr_cfg, src.dim());
    let train_start = Instant::now();
    let mut pair = PreparedPair::new(src.vectors(), tgt.vectors())?;
    pair.prepare_schedule(&schedule)?;
    let result = multi_seed(&pair, &idr_cfg, seed_dict.as_ref(), gold.as_ref())?;
    timings.insert("train_seconds".to_string(), train_start.elapsed().as_secs_f64());

    // Prefer runs whose last step converged.
    let converged: Vec<&IdrOutcome> = result.runs.iter().filter(|r| final_converged(r)).collect();
    let best = if converged.is_empty() {
        result.best()
    } else {
        let objectives: Vec<f64> = converged.iter().map(|r| r.objective).collect();
        converged[crate::idr::select_best(&objectives)?]
    };

    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let forward = forward_translations(&best.map, &best.final_src, &best.final_tgt, cfg.csls_k)?;
    let dictionary: Dictionary = forward.iter().copied().enumerate().collect();
    save_dictionary(&dictionary, &src, &tgt, cfg.out.join("dictionary.txt"))?;
    write_mapped(&best.map, best, &src, &tgt, &cfg.out)?;

    let mut metrics = BTreeMap::new();
    metrics.insert("objective".to_string(), best.objective);
    if let Some(g) = &gold {
        metrics.insert("accuracy".to_string(), accuracy_p1(&dictionary, g)?);
        metrics.insert("coverage".to_string(), g.coverage());
    }
    write_text(&cfg.out.join("step_trace.csv"), &multi_trace_csv(&result.runs, best.seed))?;
    write_text(&cfg.out.join("config.txt"), &cfg.to_config_text())?;
    timings.insert("total_seconds".to_string(), total.elapsed().as_secs_f64());

    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        inputs,
        seeds: result.runs.iter().map(|r| r.seed).collect(),
        selected_seed: best.seed,
        src_vocab: src.vocab_size(),
        tgt_vocab: tgt.vocab_size(),
        raw_dim: src.dim(),
        schedule,
        runs: result
            .runs
            .iter()
            .map(|r| RunSummary {
                seed: r.seed,
                objective: r.objective,
                termination: r.steps.last().map(|s| s.termination).unwrap_or(Termination::Converged),
                steps: r.steps.clone(),
            })
            .collect(),
        metrics: metrics.clone(),
        timings,
        notes: NOTES.iter().map(|s| s.to_string()).collect(),
    };
    let manifest_path = cfg.out.join("manifest.json");
    write_text(&manifest_path, &serde_json::to_string_pretty(&manifest).map_err(Error::from)?)?;

    println!("selected_seed = {}", best.seed);
    for (k, v) in &metrics {
        println!("{k} = {v}");
    }
    println!("out = {}", cfg.out.display());

    if !final_converged(best) {
        let last = best.steps.last().expect("non-empty schedule");
        return Err(match last.termination {
            Termination::Collapsed {
                iteration,
                distinct_targets,
                sources,
            } => Error::Collapse {
                iteration,
                distinct_targets,
                sources,
            },
            _ => Error::MaxIterations(cfg.max_iterations),
        }
        .into());
    }
    Ok(())
}

fn final_converged(run: &IdrOutcome) -> bool {
    run.steps.last().is_some_and(|s| !s.failed())
}

fn multi_trace_csv(runs: &[IdrOutcome], selected: u64) -> String {
    let mut out = String::new();
    for (i, run) in runs.iter().enumerate() {
        let csv = step_trace_csv(&run.steps, true);
        let mut lines = csv.lines();
        let header = lines.next().unwrap_or_default();
        if i == 0 {
            out.push_str(&format!("seed,selected,{header}\n"));
        }
        for line in lines {
            out.push_str(&format!("{},{},{line}\n", run.seed, run.seed == selected));
        }
    }
    out
}

fn write_mapped(
    map: &LinearMap,
    run: &IdrOutcome,
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
    out: &Path,
) -> error::Result<()> {
    let xs = map.map_src(&run.final_src)?;
    let zs = map.map_tgt(&run.final_tgt)?;
    let src_out = EmbeddingMatrix::new(src.words().to_vec(), xs, src.lang())?;
    let tgt_out = EmbeddingMatrix::new(tgt.words().to_vec(), zs, tgt.lang())?;
    save_embeddings(&src_out, out.join("src.mapped.vec"))?;
    save_embeddings(&tgt_out, out.join("tgt.mapped.vec"))
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Gold dictionary.
    #[arg(long)]
    pub gold: PathBuf,
    /// Induced dictionary file; repeat for one CSV row per file.
    #[arg(long = "dict")]
    pub dicts: Vec<PathBuf>,
    /// Mapped source embeddings (translated with CSLS).
    #[arg(long, requires = "tgt_mapped")]
    pub src_mapped: Option<PathBuf>,
    #[arg(long, requires = "src_mapped")]
    pub tgt_mapped: Option<PathBuf>,
    /// Source vocabulary for dictionary files; defaults to the dictionary's sources.
    #[arg(long)]
    pub src_emb: Option<PathBuf>,
    /// Target embeddings for dictionary similarity.
    #[arg(long)]
    pub tgt_emb: Option<PathBuf>,
    #[arg(long, default_value_t = 20_000)]
    pub vocab: usize,
    #[arg(long, default_value_t = 10)]
    pub csls_k: usize,
    /// CSV file receiving a header and one row per evaluated run.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Scores of one evaluated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub label: String,
    pub accuracy: f64,
    pub coverage: f64,
    pub evaluated: usize,
    pub dictionary_similarity: Option<f64>,
}

pub const EVALUATION_CSV_HEADER: &str = "label,accuracy,coverage,evaluated,dictionary_similarity";

impl EvaluationRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.label,
            self.accuracy,
            self.coverage,
            self.evaluated,
            self.dictionary_similarity.map(|v| v.to_string()).unwrap_or_default()
        )
    }
}

fn token_index(tokens: impl IntoIterator<Item = String>) -> (Vec<String>, HashMap<String, usize>) {
    let mut words = Vec::new();
    let mut index = HashMap::new();
    for t in tokens {
        if !index.contains_key(&t) {
            index.insert(t.clone(), words.len());
            words.push(t);
        }
    }
    (words, index)
}

fn borrowed(index: &HashMap<String, usize>) -> HashMap<&str, usize> {
    index.iter().map(|(k, &v)| (k.as_str(), v)).collect()
}

/// First prediction per source token.
fn first_predictions(pairs: &[(String, String)]) -> Vec<(String, String)> {
    let mut seen = std::collections::HashSet::new();
    pairs.iter().filter(|(s, _)| seen.insert(s.clone())).cloned().collect()
}

/// Accuracy, coverage and (with target embeddings) dictionary similarity
/// of token-level predictions.
pub fn evaluate_predictions(
    label: &str,
    predictions: &[(String, String)],
    gold: &crate::embedding_io::GoldDictionary,
    src_vocab: Option<&EmbeddingMatrix>,
    sim_space: Option<&EmbeddingMatrix>,
) -> error::Result<EvaluationRow> {
    let predictions = first_predictions(predictions);
    let (_, src_index) = match src_vocab {
        Some(e) => token_index(e.words().iter().cloned()),
        None => token_index(predictions.iter().map(|(s, _)| s.clone())),
    };
    let (_, tgt_index) = token_index(
        predictions
            .iter()
            .map(|(_, t)| t.clone())
            .chain(gold.pairs().iter().map(|(_, t)| t.clone())),
    );
    let resolved = gold.resolve_with(&borrowed(&src_index), &borrowed(&tgt_index));
    let dict: Dictionary = predictions
        .iter()
        .filter_map(|(s, t)| Some((*src_index.get(s)?, *tgt_index.get(t)?)))
        .collect();
    let accuracy = accuracy_p1(&dict, &resolved)?;

    let similarity = match sim_space {
        Some(space) => {
            let space_index = space.index();
            let gold_space = gold.resolve_with(&borrowed(&src_index), &space_index);
            let pred_space: Dictionary = predictions
                .iter()
                .filter_map(|(s, t)| Some((*src_index.get(s)?, *space_index.get(t.as_str())?)))
                .collect();
            match dictionary_similarity(&pred_space, &gold_space, space.vectors()) {
                Ok(s) => Some(s.value),
                Err(e) => {
                    warn!("{label}: dictionary similarity unavailable: {e}");
                    None
                }
            }
        }
        None => None,
    };
    Ok(EvaluationRow {
        label: label.to_string(),
        accuracy,
        coverage: resolved.coverage(),
        evaluated: resolved.num_evaluated(),
        dictionary_similarity: similarity,
    })
}

fn read_token_pairs(path: &Path) -> error::Result<Vec<(String, String)>> {
    Ok(load_gold_pairs(path)?.pairs().to_vec())
}

fn run_evaluate(args: &EvaluateArgs) -> CliResult<()> {
    if args.dicts.is_empty() && args.src_mapped.is_none() {
        return Err(missing("evaluate", "dict"));
    }
    let gold = load_gold_pairs(&args.gold)?;
    let src_vocab = args
        .src_emb
        .as_ref()
        .map(|p| load_embeddings(p, Some(args.vocab)))
        .transpose()?;
    let tgt_space = args
        .tgt_emb
        .as_ref()
        .map(|p| -> error::Result<EmbeddingMatrix> {
            let e = load_embeddings(p, Some(args.vocab))?;
            let v = normalize_center_normalize(e.vectors())?;
            e.with_vectors(v)
        })
        .transpose()?;

    let mut rows = Vec::new();
    for path in &args.dicts {
        let pairs = read_token_pairs(path)?;
        rows.push(evaluate_predictions(
            &path.display().to_string(),
            &pairs,
            &gold,
            src_vocab.as_ref(),
            tgt_space.as_ref(),
        )?);
    }
    if let (Some(sp), Some(tp)) = (&args.src_mapped, &args.tgt_mapped) {
        let xs = load_embeddings(sp, Some(args.vocab))?;
        let zs = load_embeddings(tp, Some(args.vocab))?;
        let identity = LinearMap::identity(xs.dim());
        let forward = forward_translations(&identity, xs.vectors(), zs.vectors(), args.csls_k)?;
        let pairs: Vec<(String, String)> = forward
            .iter()
            .enumerate()
            .map(|(i, &j)| (xs.words()[i].clone(), zs.words()[j].clone()))
            .collect();
        let mapped_space = match &tgt_space {
            Some(_) => None,
            None => Some(zs.with_vectors(row_normalized(zs.vectors().clone()))?),
        };
        rows.push(evaluate_predictions(
            &sp.display().to_string(),
            &pairs,
            &gold,
            Some(&xs),
            tgt_space.as_ref().or(mapped_space.as_ref()),
        )?);
    }

    for row in &rows {
        println!("label = {}", row.label);
        println!("accuracy = {}", row.accuracy);
        println!("coverage = {}", row.coverage);
        println!("evaluated = {}", row.evaluated);
        if let Some(s) = row.dictionary_similarity {
            println!("dictionary_similarity = {s}");
        }
    }
    if let Some(csv) = &args.csv {
        let mut text = format!("{EVALUATION_CSV_HEADER}\n");
        for row in &rows {
            text.push_str(&row.csv());
            text.push('\n');
        }
        write_text(csv, &text)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub src_emb: PathBuf,
    #[arg(long)]
    pub tgt_emb: PathBuf,
    #[arg(long, default_value_t = 20_000)]
    pub vocab: usize,
    /// Gold dictionary for coverage, oracle similarity and maximum accuracy.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Mapped embeddings for hubness and accuracy; without them the
    /// preprocessed inputs are treated as sharing one space.
    #[arg(long, requires = "tgt_mapped")]
    pub src_mapped: Option<PathBuf>,
    #[arg(long, requires = "src_mapped")]
    pub tgt_mapped: Option<PathBuf>,
    /// Dimensions of the eigenvector-similarity sweep.
    #[arg(long, value_delimiter = ',', default_value = "50,100,200,300")]
    pub dims: Vec<usize>,
    /// Words per nearest-neighbour graph (clamped to the vocabulary).
    #[arg(long, default_value_t = 10_000)]
    pub delta_vocab: usize,
    #[arg(long, default_value_t = DEFAULT_GRAPH_NEIGHBORS)]
    pub knn: usize,
    /// Plain PCA in the sweep instead of dropmax.
    #[arg(long)]
    pub no_dropmax: bool,
    /// Projection dimension for the after-dropmax cosine (default: half the dimension).
    #[arg(long)]
    pub dropmax_dim: Option<usize>,
    #[arg(long, default_value_t = 4000)]
    pub init_vocab: usize,
    #[arg(long, default_value_t = DEFAULT_COSINE_SAMPLE)]
    pub cosine_sample: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub csls_k: usize,
    /// Key-value report file (also printed to stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Hubness of `src` against `tgt` before and after dropping the first
/// principal component of both sides jointly.
fn hubness_pair(src: &DMatrix<f64>, tgt: &DMatrix<f64>) -> error::Result<(f64, Option<f64>)> {
    let before = hubness(src, tgt)?;
    let d = src.ncols();
    if d < 2 {
        return Ok((before, None));
    }
    let mut stacked = DMatrix::zeros(src.nrows() + tgt.nrows(), d);
    stacked.rows_mut(0, src.nrows()).copy_from(src);
    stacked.rows_mut(src.nrows(), tgt.nrows()).copy_from(tgt);
    let model = fit_pca(&stacked)?;
    let xs = project(&model, src, d - 1, true)?;
    let zs = project(&model, tgt, d - 1, true)?;
    Ok((before, Some(hubness(&xs, &zs)?)))
}

pub fn diagnose(args: &DiagnoseArgs) -> error::Result<DiagnosticsReport> {
    let src = load_embeddings(&args.src_emb, Some(args.vocab))?;
    let tgt = load_embeddings(&args.tgt_emb, Some(args.vocab))?;
    let mut report = DiagnosticsReport::default();
    let raw = src.dim();

    let (ps, pt) = rayon::join(|| fit_pca(src.vectors()), || fit_pca(tgt.vectors()));
    let (ps, pt) = (ps?, pt?);
    report.explained_variance_top1_src = Some(explained_variance_top1(&ps)?);
    report.explained_variance_top1_tgt = Some(explained_variance_top1(&pt)?);
    report.mean_cosine_src = Some(mean_pairwise_cosine(src.vectors(), args.cosine_sample, args.seed)?);
    report.mean_cosine_tgt = Some(mean_pairwise_cosine(tgt.vectors(), args.cosine_sample, args.seed)?);
    let n = args.dropmax_dim.unwrap_or((raw / 2).max(1));
    report.mean_cosine_src_after_dropmax = Some(mean_pairwise_cosine(
        &project(&ps, src.vectors(), n, true)?,
        args.cosine_sample,
        args.seed,
    )?);
    report.mean_cosine_tgt_after_dropmax = Some(mean_pairwise_cosine(
        &project(&pt, tgt.vectors(), n, true)?,
        args.cosine_sample,
        args.seed,
    )?);

    if src.dim() == tgt.dim() {
        let mut pair = PreparedPair::new(src.vectors(), tgt.vectors())?;
        let vocab = args.delta_vocab.min(src.vocab_size()).min(tgt.vocab_size());
        if vocab < args.delta_vocab {
            report.notes.push(format!("eigenvector similarity over {vocab} words"));
        }
        let steps: Vec<DimStep> = args
            .dims
            .iter()
            .filter(|&&d| d >= 2 && d <= raw)
            .map(|&d| DimStep {
                dim: d,
                reduced: d < raw,
                dropmax: !args.no_dropmax && d < raw,
            })
            .collect();
        for &d in args.dims.iter().filter(|&&d| d > raw || d < 2) {
            report.notes.push(format!("dimension {d} skipped (raw dimension {raw})"));
        }
        pair.prepare_schedule(&steps)?;
        for step in &steps {
            let (x, z) = pair.at(step)?;
            let delta = eigenvector_similarity(&x, &z, vocab, args.knn)?;
            report.eigenvector_similarity_by_dim.push((step.dim, delta));
        }
        report.eigenvector_similarity = Some(eigenvector_similarity(&pair.src, &pair.tgt, vocab, args.knn)?);

        let (hx, hz) = match (&args.src_mapped, &args.tgt_mapped) {
            (Some(a), Some(b)) => (
                load_embeddings(a, Some(args.vocab))?.vectors().clone(),
                load_embeddings(b, Some(args.vocab))?.vectors().clone(),
            ),
            _ => {
                report
                    .notes
                    .push("hubness computed on the preprocessed inputs without a mapping".into());
                (pair.src.clone(), pair.tgt.clone())
            }
        };
        let (before, after) = hubness_pair(&hx, &hz)?;
        report.hubness = Some(before);
        report.hubness_after_dropmax = after;

        if let Some(g) = &args.gold {
            let gold = load_gold_pairs(g)?;
            let resolved = gold.resolve(&src, &tgt);
            report.coverage = Some(resolved.coverage());
            report.max_accuracy = Some(maximum_accuracy(&resolved, args.init_vocab, args.init_vocab));
            let ns = args.init_vocab.min(src.vocab_size());
            let nt = args.init_vocab.min(tgt.vocab_size());
            let sp = build_profile(&pair.src.rows(0, ns).into_owned())?;
            let tp = build_profile(&pair.tgt.rows(0, nt).into_owned())?;
            match oracle_structural_similarity(&sp, &tp, &resolved.dictionary()) {
                Ok(v) => report.oracle_structural_similarity = Some(v),
                Err(e) => report.notes.push(format!("oracle structural similarity unavailable: {e}")),
            }
            if let (Some(a), Some(b)) = (&args.src_mapped, &args.tgt_mapped) {
                let xs = load_embeddings(a, Some(args.vocab))?;
                let zs = load_embeddings(b, Some(args.vocab))?;
                let forward =
                    forward_translations(&LinearMap::identity(xs.dim()), xs.vectors(), zs.vectors(), args.csls_k)?;
                let mapped_gold = gold.resolve(&xs, &zs);
                let dict: Dictionary = forward.into_iter().enumerate().collect();
                report.accuracy = Some(accuracy_p1(&dict, &mapped_gold)?);
                let space = normalize_center_normalize(tgt.vectors())?;
                if zs.words() == tgt.words() {
                    report.dictionary_similarity = Some(dictionary_similarity(&dict, &resolved, &space)?.value);
                }
            }
        }
    } else {
        report
            .notes
            .push(format!("dimensions differ ({} vs {}); cross-lingual diagnostics skipped", src.dim(), tgt.dim()));
    }
    if !report.is_consistent() {
        warn!("diagnostics report has out-of-range values");
    }
    Ok(report)
}

fn run_diagnose(args: &DiagnoseArgs) -> CliResult<()> {
    let report = diagnose(args)?;
    let text = report.to_key_value();
    print!("{text}");
    if let Some(p) = &args.out {
        write_text(p, &text)?;
    }
    if let Some(p) = &args.csv {
        write_text(p, &format!("{}\n{}\n", report.csv_header(), report.csv_row()))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1500)]
    pub vocab: usize,
    #[arg(long, default_value_t = 50)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub dominant_scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Writes `src.vec`, `tgt.vec` and `gold.txt` into `args.out`.
pub fn run_synth(args: &SynthArgs) -> error::Result<()> {
    let pair = generate_pair(&SynthSpec {
        vocab: args.vocab,
        dim: args.dim,
        noise_sigma: args.noise,
        dominant_axis_scale: args.dominant_scale,
        seed: args.seed,
    })?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    save_embeddings(&pair.src, args.out.join("src.vec"))?;
    save_embeddings(&pair.tgt, args.out.join("tgt.vec"))?;
    save_dictionary(&pair.gold, &pair.src, &pair.tgt, args.out.join("gold.txt"))?;
    info!("wrote synthetic pair to {}", args.out.display());
    Ok(())
}

fn configure_workers() {
    if let Some(n) = std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            warn!("worker pool already initialized; {WORKERS_ENV} ignored");
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    configure_workers();
    match &cli.command {
        Command::Train(a) => run_train(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Diagnose(a) => run_diagnose(a),
        Command::Synth(a) => run_synth(a).map_err(CliError::from),
    }
}

/// Entry point of the binary.
pub fn main() -> ExitCode {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(e)) => {
            let _ = e.print();
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            let _ = writeln!(BufWriter::new(io::stderr()), "error: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> TrainArgs {
        let mut argv = vec!["idrmap", "train"];
        argv.extend_from_slice(args);
        match Cli::try_parse_from(argv).unwrap().command {
            Command::Train(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn defaults_resolve() {
        let cfg = parse(&["--src-emb", "a.vec", "--tgt-emb", "b.vec"]).resolve().unwrap();
        assert_eq!(cfg.mode, Mode::Idr);
        assert_eq!(cfg.init_dim, 50);
        assert_eq!(cfg.seeds, 3);
        assert_eq!(cfg.vocab, 20_000);
        assert!(cfg.dropmax && cfg.idr && cfg.final_transforms);
    }

    #[test]
    fn missing_target_is_usage_error() {
        assert!(matches!(parse(&["--src-emb", "a.vec"]).resolve(), Err(CliError::Usage(_))));
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.txt");
        fs::write(
            &path,
            "# comment\nsrc_emb = a.vec\ntgt-emb = b.vec\ninit_dim = 16\nseeds = 5\ndropmax = false\nmode = vecmap\n",
        )
        .unwrap();
        let p = path.to_str().unwrap();
        let cfg = parse(&["--config", p, "--seeds", "2"]).resolve().unwrap();
        assert_eq!(cfg.init_dim, 16);
        assert_eq!(cfg.seeds, 2);
        assert!(!cfg.dropmax);
        assert_eq!(cfg.mode, Mode::Vecmap);
        assert_eq!(cfg.csls_k, 10);
        assert_eq!(cfg.src_emb, PathBuf::from("a.vec"));
    }

    #[test]
    fn config_text_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse(&["--src-emb", "a.vec", "--tgt-emb", "b.vec", "--no-dropmax", "--max-dim", "40"])
            .resolve()
            .unwrap();
        let path = dir.path().join("cfg.txt");
        fs::write(&path, cfg.to_config_text()).unwrap();
        let again = parse(&["--config", path.to_str().unwrap()]).resolve().unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.txt");
        fs::write(&path, "src_emb = a\ntgt_emb = b\nbogus = 1\n").unwrap();
        assert!(matches!(
            parse(&["--config", path.to_str().unwrap()]).resolve(),
            Err(CliError::Run(Error::Config(_)))
        ));
    }

    #[test]
    fn seeded_mode_needs_seed_dict() {
        let r = parse(&["--src-emb", "a", "--tgt-emb", "b", "--mode", "seeded"]).resolve();
        assert!(matches!(r, Err(CliError::Usage(_))));
    }

    #[test]
    fn vecmap_mode_is_one_raw_step() {
        let cfg = parse(&["--src-emb", "a", "--tgt-emb", "b", "--mode", "vecmap"]).resolve().unwrap();
        let idr = cfg.idr_config(64, 1000);
        assert_eq!(idr.bridge_vocab, 1000);
        assert_eq!(
            dimension_schedule(&idr, 64),
            vec![DimStep { dim: 64, reduced: false, dropmax: false }]
        );
    }

    #[test]
    fn evaluation_of_gold_against_itself() {
        let gold = crate::embedding_io::GoldDictionary::new(vec![
            ("cat".into(), "gato".into()),
            ("cat".into(), "minino".into()),
            ("dog".into(), "perro".into()),
        ])
        .unwrap();
        let row = evaluate_predictions("g", gold.pairs(), &gold, None, None).unwrap();
        assert_eq!(row.accuracy, 1.0);
        assert_eq!(row.coverage, 1.0);
        assert_eq!(row.evaluated, 2);
        assert_eq!(row.csv().split(',').count(), EVALUATION_CSV_HEADER.split(',').count());
    }
}
