//! Unsupervised seed dictionary from monolingual similarity structure.
//!
//! Each word is described by the sorted distribution of its (square-rooted)
//! similarities to the rest of its own vocabulary. These profiles do not
//! depend on the coordinate system of the embedding space, so they can be
//! compared across languages directly.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::linalg::normalize_rows;
use crate::self_learning::Direction;

/// One sorted, unit-norm similarity profile per word.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralProfile {
    matrix: DMatrix<f64>,
}

impl StructuralProfile {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn vocab_size(&self) -> usize {
        self.matrix.nrows()
    }

    /// Keeps the `n` largest entries of every row and renormalizes.
    fn truncated(&self, n: usize) -> DMatrix<f64> {
        let cols = self.matrix.ncols();
        let mut m = self.matrix.columns(cols - n, n).into_owned();
        // Rows always keep their maximum (the self-similarity), so never zero.
        normalize_rows(&mut m).expect("profile rows keep a positive entry");
        m
    }

    /// Cosine between profile row `i` of `self` and row `j` of `other`.
    pub fn row_cosine(&self, i: usize, other: &StructuralProfile, j: usize) -> f64 {
        let n = self.matrix.ncols().min(other.matrix.ncols());
        let a = self.matrix.row(i);
        let b = other.matrix.row(j);
        let a = a.columns(a.len() - n, n);
        let b = b.columns(b.len() - n, n);
        a.dot(&b) / (a.norm() * b.norm())
    }
}

/// `√max(E·Eᵀ, 0)` entrywise, each row sorted ascending and scaled to unit norm.
pub fn build_profile(emb: &DMatrix<f64>) -> Result<StructuralProfile> {
    let v = emb.nrows();
    if v == 0 {
        return Err(Error::TooFewRows {
            required: 1,
            found: 0,
        });
    }
    let gram = emb * emb.transpose();
    let rows: Vec<Vec<f64>> = (0..v)
        .into_par_iter()
        .map(|i| {
            let mut row: Vec<f64> = gram.row(i).iter().map(|&s| s.max(0.0).sqrt()).collect();
            row.sort_by(|a, b| a.total_cmp(b));
            row
        })
        .collect();
    let mut matrix = DMatrix::from_fn(v, v, |i, j| rows[i][j]);
    normalize_rows(&mut matrix).map_err(|row| Error::ZeroNormRow { row })?;
    Ok(StructuralProfile { matrix })
}

/// Nearest-neighbour matching of profile rows in both directions.
pub fn init_dictionary(src: &StructuralProfile, tgt: &StructuralProfile) -> Result<Dictionary> {
    init_dictionary_directed(src, tgt, Direction::Union)
}

pub fn init_dictionary_directed(
    src: &StructuralProfile,
    tgt: &StructuralProfile,
    direction: Direction,
) -> Result<Dictionary> {
    let n = src.matrix.ncols().min(tgt.matrix.ncols());
    if n == 0 {
        return Err(Error::VocabularyMismatch("empty profile".into()));
    }
    let a = src.truncated(n);
    let b = tgt.truncated(n);
    if a.ncols() != b.ncols() {
        return Err(Error::VocabularyMismatch(format!(
            "profile widths {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let sim = &a * b.transpose();
    let mut dict = Dictionary::default();
    if matches!(direction, Direction::Forward | Direction::Union) {
        let fwd: Vec<usize> = (0..sim.nrows())
            .into_par_iter()
            .map(|i| crate::linalg::argmax(sim.row(i).iter().copied()).unwrap_or(0))
            .collect();
        for (i, j) in fwd.into_iter().enumerate() {
            dict.push(i, j);
        }
    }
    if matches!(direction, Direction::Backward | Direction::Union) {
        let bwd: Vec<usize> = (0..sim.ncols())
            .into_par_iter()
            .map(|j| crate::linalg::argmax(sim.column(j).iter().copied()).unwrap_or(0))
            .collect();
        for (j, i) in bwd.into_iter().enumerate() {
            dict.push(i, j);
        }
    }
    Ok(dict)
}
