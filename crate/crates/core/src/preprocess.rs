//! Embedding normalization and the whitening / re-weighting / de-whitening
//! transforms applied around the final orthogonal mapping.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{center_rows, column_means, normalize_rows, second_moment};

/// Eigenvalues of the second-moment matrix below this are clamped before
/// taking the inverse square root.
pub const WHITENING_EIGEN_FLOOR: f64 = 1e-12;

/// Unit-length rows, dimension-wise mean centering, unit-length rows again.
pub fn normalize_center_normalize(emb: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = emb.clone();
    normalize_rows(&mut out).map_err(|row| Error::ZeroNormRow { row })?;
    let mean = column_means(&out);
    center_rows(&mut out, &mean);
    normalize_rows(&mut out).map_err(|row| Error::ZeroNormRow { row })?;
    Ok(out)
}

/// Symmetric whitening map `C^{-1/2}` together with its inverse `C^{1/2}`,
/// where `C = (1/V)·ZᵀZ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Whitening {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl Whitening {
    pub fn identity(dim: usize) -> Self {
        Whitening {
            matrix: DMatrix::identity(dim, dim),
            inverse: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
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

    pub fn apply(&self, emb: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(emb)?;
        Ok(emb * &self.matrix)
    }

    /// The de-whitening matrix expressed in the basis reached by `rotation`:
    /// `Rᵀ·C^{1/2}·R`.
    pub fn inverse_in_basis(&self, rotation: &DMatrix<f64>) -> DMatrix<f64> {
        rotation.transpose() * &self.inverse * rotation
    }
}

/// Fits the whitening transform of `emb` (rows are samples, no centering).
pub fn fit_whitening(emb: &DMatrix<f64>) -> Result<Whitening> {
    if emb.nrows() == 0 {
        return Err(Error::TooFewRows {
            required: 1,
            found: 0,
        });
    }
    let cov = second_moment(emb);
    let eig = SymmetricEigen::new(cov);
    let d = emb.ncols();
    let floored: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&l| l.max(WHITENING_EIGEN_FLOOR))
        .collect();
    let inv_sqrt = DVector::from_iterator(d, floored.iter().map(|l| 1.0 / l.sqrt()));
    let sqrt = DVector::from_iterator(d, floored.iter().map(|l| l.sqrt()));
    let q = &eig.eigenvectors;
    let matrix = q * DMatrix::from_diagonal(&inv_sqrt) * q.transpose();
    let inverse = q * DMatrix::from_diagonal(&sqrt) * q.transpose();
    Ok(Whitening { matrix, inverse })
}

/// Scales the columns of both mapped sides by `√S`.
pub fn symmetric_reweight(
    mapped_src: &DMatrix<f64>,
    mapped_tgt: &DMatrix<f64>,
    singular_values: &DVector<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let weights = reweight_factors(singular_values)?;
    for m in [mapped_src, mapped_tgt] {
        if m.ncols() != weights.len() {
            return Err(Error::TransformDimension {
                expected: weights.len(),
                found: m.ncols(),
            });
        }
    }
    let scale = |m: &DMatrix<f64>| {
        let mut out = m.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col.scale_mut(weights[j]);
        }
        out
    };
    Ok((scale(mapped_src), scale(mapped_tgt)))
}

fn reweight_factors(singular_values: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some((index, &value)) = singular_values
        .iter()
        .enumerate()
        .find(|(_, &s)| s < 0.0 || !s.is_finite())
    {
        return Err(Error::NegativeSingularValue { index, value });
    }
    Ok(singular_values.map(f64::sqrt))
}

/// Undoes `whitening`: `emb · C^{1/2}`.
pub fn dewhiten(emb: &DMatrix<f64>, whitening: &Whitening) -> Result<DMatrix<f64>> {
    whitening.check(emb)?;
    Ok(emb * &whitening.inverse)
}

/// One fitted step of a [`TransformChain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TransformStep {
    Whiten(Whitening),
    Rotate(DMatrix<f64>),
    /// Column scaling by `√S`.
    Reweight(DVector<f64>),
    /// De-whitening expressed in the rotated basis.
    Dewhiten {
        whitening: Whitening,
        rotation: DMatrix<f64>,
    },
}

impl TransformStep {
    pub fn name(&self) -> &'static str {
        match self {
            TransformStep::Whiten(_) => "whiten",
            TransformStep::Rotate(_) => "rotate",
            TransformStep::Reweight(_) => "reweight",
            TransformStep::Dewhiten { .. } => "dewhiten",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TransformStep::Whiten(w) => w.dim(),
            TransformStep::Rotate(r) => r.nrows(),
            TransformStep::Reweight(s) => s.len(),
            TransformStep::Dewhiten { whitening, .. } => whitening.dim(),
        }
    }

    fn matrix(&self) -> DMatrix<f64> {
        match self {
            TransformStep::Whiten(w) => w.matrix.clone(),
            TransformStep::Rotate(r) => r.clone(),
            TransformStep::Reweight(s) => DMatrix::from_diagonal(&s.map(f64::sqrt)),
            TransformStep::Dewhiten {
                whitening,
                rotation,
            } => whitening.inverse_in_basis(rotation),
        }
    }
}

/// Ordered list of linear steps applied to row embeddings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformChain {
    steps: Vec<TransformStep>,
}

impl TransformChain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, step: TransformStep) -> Result<()> {
        if let TransformStep::Reweight(s) = &step {
            reweight_factors(s)?;
        }
        if let Some(last) = self.steps.last() {
            if last.dim() != step.dim() {
                return Err(Error::TransformDimension {
                    expected: last.dim(),
                    found: step.dim(),
                });
            }
        }
        self.steps.push(step);
        Ok(())
    }

    pub fn steps(&self) -> &[TransformStep] {
        &self.steps
    }

    pub fn dim(&self) -> Option<usize> {
        self.steps.first().map(TransformStep::dim)
    }

    /// The whole chain collapsed into one `d×d` matrix.
    pub fn composed(&self) -> Option<DMatrix<f64>> {
        let mut it = self.steps.iter();
        let first = it.next()?.matrix();
        Some(it.fold(first, |acc, s| acc * s.matrix()))
    }

    pub fn apply(&self, emb: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self.composed() {
            None => Ok(emb.clone()),
            Some(m) => {
                if emb.ncols() != m.nrows() {
                    return Err(Error::TransformDimension {
                        expected: m.nrows(),
                        found: emb.ncols(),
                    });
                }
                Ok(emb * m)
            }
        }
    }
}
