use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the alignment pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: empty embedding file")]
    EmptyFile { path: PathBuf },

    #[error("{path}:{line}: malformed header {header:?}, expected \"<vocab> <dim>\"")]
    MalformedHeader {
        path: PathBuf,
        line: usize,
        header: String,
    },

    #[error("{path}:{line}: expected {expected} vector components, found {found}")]
    DimensionMismatch {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}:{line}: value {value:?} is not a finite number")]
    NonFinite {
        path: PathBuf,
        line: usize,
        value: String,
    },

    #[error("{path}:{line}: empty token")]
    EmptyToken { path: PathBuf, line: usize },

    #[error("{path}: header announces {expected} rows but file ends after {found}")]
    TruncatedFile {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("{path}:{line}: expected exactly two tokens, found {found}")]
    DictionaryLine {
        path: PathBuf,
        line: usize,
        found: usize,
    },

    #[error("{path}: dictionary file contains no pairs")]
    EmptyDictionary { path: PathBuf },

    #[error("refusing to write an embedding matrix with an empty vocabulary")]
    EmptyVocabulary,

    #[error("invalid embedding matrix: {0}")]
    InvalidEmbedding(String),

    #[error("row {row} has zero norm")]
    ZeroNormRow { row: usize },

    #[error("dimension mismatch: transform fitted on {expected} dimensions, input has {found}")]
    TransformDimension { expected: usize, found: usize },

    #[error("singular value {index} is negative ({value})")]
    NegativeSingularValue { index: usize, value: f64 },

    #[error("need at least {required} rows, got {found}")]
    TooFewRows { required: usize, found: usize },

    #[error("target dimension {requested} is out of range (maximum {max}, dropmax = {dropmax})")]
    ProjectionDimension {
        requested: usize,
        max: usize,
        dropmax: bool,
    },

    #[error("all eigenvalues are zero")]
    ZeroVariance,

    #[error("vocabulary size mismatch: {0}")]
    VocabularyMismatch(String),

    #[error("neighborhood size k = {k} outside 1..={max}")]
    NeighborhoodSize { k: usize, max: usize },

    #[error("dictionary is empty")]
    EmptyDictionaryPairs,

    #[error("dictionary pair ({src}, {tgt}) is out of range for vocabularies {src_len} x {tgt_len}")]
    PairOutOfRange {
        src: usize,
        tgt: usize,
        src_len: usize,
        tgt_len: usize,
    },

    #[error("SVD failed (non-finite input or no convergence)")]
    SvdFailure,

    #[error("dictionary collapsed at iteration {iteration}: {distinct_targets} distinct targets for {sources} sources")]
    Collapse {
        iteration: usize,
        distinct_targets: usize,
        sources: usize,
    },

    #[error("self-learning did not converge within {0} iterations")]
    MaxIterations(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("nothing to evaluate: {0}")]
    EmptyEvaluation(String),

    #[error("no runs to select from")]
    NoRuns,

    #[error("requested {requested} words but vocabulary has {available}")]
    VocabularyTooSmall { requested: usize, available: usize },

    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
