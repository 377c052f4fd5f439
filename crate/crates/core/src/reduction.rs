//! PCA projection with optional removal of the dominant component
//! ("dropmax"), plus the clustering diagnostics that motivate it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{center_rows, column_means};

/// Default number of sampled pairs for [`mean_pairwise_cosine`].
pub const DEFAULT_COSINE_SAMPLE: usize = 1_000_000;

/// Eigen-decomposition of the feature covariance, components sorted by
/// descending eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    mean: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    eigenvalues: DVector<f64>,
}

impl PcaModel {
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Columns are the principal axes.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Total variance `Σλ`.
    pub fn total_variance(&self) -> f64 {
        self.eigenvalues.sum()
    }

    /// Column range used by [`project`].
    pub fn component_range(&self, n: usize, dropmax: bool) -> Result<std::ops::Range<usize>> {
        let max = if dropmax {
            self.dim().saturating_sub(1)
        } else {
            self.dim()
        };
        if n == 0 || n > max {
            return Err(Error::ProjectionDimension {
                requested: n,
                max,
                dropmax,
            });
        }
        let start = usize::from(dropmax);
        Ok(start..start + n)
    }

    /// Variance carried by the selected components.
    pub fn retained_variance(&self, n: usize, dropmax: bool) -> Result<f64> {
        let range = self.component_range(n, dropmax)?;
        Ok(self.eigenvalues.rows(range.start, range.len()).sum())
    }
}

/// Fits PCA on the rows of `emb` using the population covariance.
pub fn fit_pca(emb: &DMatrix<f64>) -> Result<PcaModel> {
    if emb.nrows() < 2 {
        return Err(Error::TooFewRows {
            required: 2,
            found: emb.nrows(),
        });
    }
    let mean = column_means(emb);
    let mut centered = emb.clone();
    center_rows(&mut centered, &mean);
    let cov = (centered.transpose() * &centered) / emb.nrows() as f64;
    let eig = SymmetricEigen::new(cov);

    let m = emb.ncols();
    let mut order: Vec<usize> = (0..m).collect();
    // Stable sort keeps the solver's order among equal eigenvalues.
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut eigenvectors = DMatrix::zeros(m, m);
    let mut eigenvalues = DVector::zeros(m);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues[dst] = eig.eigenvalues[src].max(0.0);
        let mut col = eig.eigenvectors.column(src).into_owned();
        let pivot = col
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        eigenvectors.set_column(dst, &col);
    }
    Ok(PcaModel {
        mean,
        eigenvectors,
        eigenvalues,
    })
}

/// `λ₁ / Σλ`.
pub fn explained_variance_top1(model: &PcaModel) -> Result<f64> {
    let total = model.total_variance();
    if total <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(model.eigenvalues[0] / total)
}

/// Centers `emb` by the model mean and projects onto `n` components:
/// the top `n` or, with `dropmax`, components `2..=n+1`.
pub fn project(model: &PcaModel, emb: &DMatrix<f64>, n: usize, dropmax: bool) -> Result<DMatrix<f64>> {
    if emb.ncols() != model.dim() {
        return Err(Error::TransformDimension {
            expected: model.dim(),
            found: emb.ncols(),
        });
    }
    let range = model.component_range(n, dropmax)?;
    let mut centered = emb.clone();
    center_rows(&mut centered, &model.mean);
    Ok(centered * model.eigenvectors.columns(range.start, range.len()))
}

/// Mean cosine over unordered row pairs: every pair when there are at most
/// `sample` of them, otherwise `sample` uniformly drawn pairs.
pub fn mean_pairwise_cosine(emb: &DMatrix<f64>, sample: usize, seed: u64) -> Result<f64> {
    let v = emb.nrows();
    if v < 2 {
        return Err(Error::TooFewRows {
            required: 2,
            found: v,
        });
    }
    if sample == 0 {
        return Err(Error::Config("cosine sample size must be positive".into()));
    }
    let mut unit = emb.clone();
    for mut row in unit.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row.unscale_mut(norm);
        }
    }
    let total_pairs = v as u128 * (v as u128 - 1) / 2;
    let cos = |i: usize, j: usize| unit.row(i).dot(&unit.row(j));

    if total_pairs <= sample as u128 {
        let gram = &unit * unit.transpose();
        let mut sum = 0.0;
        for i in 0..v {
            for j in i + 1..v {
                sum += gram[(i, j)];
            }
        }
        return Ok(sum / total_pairs as f64);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    for _ in 0..sample {
        let i = rng.random_range(0..v);
        let mut j = rng.random_range(0..v - 1);
        if j >= i {
            j += 1;
        }
        sum += cos(i, j);
    }
    Ok(sum / sample as f64)
}
