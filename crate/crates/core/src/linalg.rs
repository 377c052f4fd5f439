//! Small dense helpers shared by the pipeline stages.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;

/// `(U, S, V)` as returned by [`svd`].
pub type Svd = (DMatrix<f64>, DVector<f64>, DMatrix<f64>);

/// Full SVD `M = U·diag(S)·Vᵀ` with singular values in descending order.
///
/// Backed by faer: nalgebra's SVD returns inconsistent factors for some
/// rank-deficient inputs.
pub fn svd(m: &DMatrix<f64>) -> Result<Svd, Error> {
    let f = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let dec = f.svd().map_err(|_| Error::SvdFailure)?;
    let (u, v) = (dec.U(), dec.V());
    let s = dec.S().column_vector();
    let k = m.nrows().min(m.ncols());
    Ok((
        DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)]),
        DVector::from_fn(k, |i, _| s[i]),
        DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)]),
    ))
}

/// Rows of `m` selected by `indices`, in order.
pub fn gather_rows(m: &DMatrix<f64>, indices: impl IntoIterator<Item = usize>) -> DMatrix<f64> {
    let indices: Vec<usize> = indices.into_iter().collect();
    let mut out = DMatrix::zeros(indices.len(), m.ncols());
    for (r, &i) in indices.iter().enumerate() {
        out.row_mut(r).copy_from(&m.row(i));
    }
    out
}

/// Scales each row to unit Euclidean norm; returns the first zero-norm row on failure.
pub fn normalize_rows(m: &mut DMatrix<f64>) -> Result<(), usize> {
    for i in 0..m.nrows() {
        let norm = m.row(i).norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(i);
        }
        m.row_mut(i).unscale_mut(norm);
    }
    Ok(())
}

pub fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows().max(1) as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

/// Subtracts `mean` from every row in place.
pub fn center_rows(m: &mut DMatrix<f64>, mean: &DVector<f64>) {
    for (j, mut col) in m.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
}

/// Population second-moment matrix `(1/V)·MᵀM`.
pub fn second_moment(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows().max(1) as f64;
    (m.transpose() * m) / n
}

/// `max |QᵀQ − I|`.
pub fn orthogonality_error(q: &DMatrix<f64>) -> f64 {
    let n = q.ncols();
    (q.transpose() * q - DMatrix::<f64>::identity(n, n)).amax()
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Mean of the `k` largest values; `k` must not exceed `values.len()`.
pub fn top_k_mean(values: &[f64], k: usize) -> f64 {
    let mut buf = values.to_vec();
    let n = buf.len();
    buf.select_nth_unstable_by(n - k, |a, b| a.total_cmp(b));
    let top = &mut buf[n - k..];
    top.sort_by(|a, b| a.total_cmp(b));
    top.iter().sum::<f64>() / k as f64
}

/// Fixed-capacity holder of the `k` largest values seen so far.
#[derive(Debug, Clone)]
pub(crate) struct TopK {
    values: Vec<f64>,
    k: usize,
}

impl TopK {
    pub(crate) fn new(k: usize) -> Self {
        TopK {
            values: Vec::with_capacity(k + 1),
            k,
        }
    }

    pub(crate) fn push(&mut self, v: f64) {
        if self.values.len() < self.k {
            self.values.push(v);
            return;
        }
        let (min_i, min_v) = self
            .values
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("k >= 1");
        if v > min_v {
            self.values[min_i] = v;
        }
    }

    pub(crate) fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mean of the retained values, summed in sorted order so the result
    /// does not depend on insertion order.
    pub(crate) fn mean(&self) -> f64 {
        let mut v = self.values.clone();
        v.sort_by(|a, b| a.total_cmp(b));
        v.iter().sum::<f64>() / v.len() as f64
    }
}
