//! Unsupervised bilingual dictionary induction: structural initialization,
//! self-learning with orthogonal mappings and CSLS retrieval, PCA with the
//! dropmax option, iterative dimension reduction, diagnostics and a
//! synthetic benchmark.

pub mod cli;
pub mod dictionary;
pub mod embedding_io;
pub mod error;
pub mod idr;
pub mod init;
pub mod linalg;
pub mod metrics;
pub mod preprocess;
pub mod reduction;
pub mod self_learning;
pub mod synthbench;

pub use dictionary::Dictionary;
pub use error::{Error, Result};
