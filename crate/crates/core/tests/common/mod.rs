//! Reference implementations used as test oracles. They favour obvious
//! loops over speed and share no code with the library.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues in descending order and the matching eigenvectors as columns.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() < 1e-15 * (1.0 + m.diagonal().abs().max()) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m[(b, b)].total_cmp(&m[(a, a)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Population covariance with explicit loops.
pub fn covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = x.shape();
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            mean[j] += x[(i, j)];
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut c = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let mut s = 0.0;
            for i in 0..n {
                s += (x[(i, a)] - mean[a]) * (x[(i, b)] - mean[b]);
            }
            c[(a, b)] = s / n as f64;
        }
    }
    c
}

/// Sum of singular values: the eigenvalues of `[[0, M], [Mᵀ, 0]]` are
/// `±σᵢ`, which keeps small singular values accurate.
pub fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    let (r, c) = m.shape();
    let mut b = DMatrix::zeros(r + c, r + c);
    for i in 0..r {
        for j in 0..c {
            b[(i, r + j)] = m[(i, j)];
            b[(r + j, i)] = m[(i, j)];
        }
    }
    let (values, _) = jacobi_eigen(&b);
    values.iter().map(|l| l.abs()).sum::<f64>() / 2.0
}

/// Orthogonal matrix by Gram-Schmidt on a Gaussian matrix.
pub fn gram_schmidt_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut q = gaussian(d, d, rng);
    for j in 0..d {
        for _ in 0..2 {
            for k in 0..j {
                let dot: f64 = (0..d).map(|r| q[(r, j)] * q[(r, k)]).sum();
                for r in 0..d {
                    q[(r, j)] -= dot * q[(r, k)];
                }
            }
        }
        let norm: f64 = (0..d).map(|r| q[(r, j)] * q[(r, j)]).sum::<f64>().sqrt();
        for r in 0..d {
            q[(r, j)] /= norm;
        }
    }
    q
}

fn topk_mean(mut values: Vec<f64>, k: usize) -> f64 {
    values.sort_by(|a, b| b.total_cmp(a));
    values[..k].iter().sum::<f64>() / k as f64
}

fn first_argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, v) in values.enumerate() {
        if v > best.0 {
            best = (v, i);
        }
    }
    best.1
}

/// Brute-force CSLS: forward pairs `(i, argmax_j)` then backward pairs
/// `(argmax_i, j)`.
pub fn brute_csls(sim: &DMatrix<f64>, k: usize) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let (s, t) = sim.shape();
    let r_row: Vec<f64> = (0..s).map(|i| topk_mean((0..t).map(|j| sim[(i, j)]).collect(), k)).collect();
    let r_col: Vec<f64> = (0..t).map(|j| topk_mean((0..s).map(|i| sim[(i, j)]).collect(), k)).collect();
    let csls = |i: usize, j: usize| 2.0 * sim[(i, j)] - r_row[i] - r_col[j];
    let forward = (0..s).map(|i| (i, first_argmax((0..t).map(|j| csls(i, j))))).collect();
    let backward = (0..t).map(|j| (first_argmax((0..s).map(|i| csls(i, j))), j)).collect();
    (forward, backward)
}

/// Mean cosine over all unordered row pairs.
pub fn brute_mean_cosine(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            sum += x.row(i).dot(&x.row(j)) / (x.row(i).norm() * x.row(j).norm());
            count += 1;
        }
    }
    sum / count as f64
}

pub fn uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0)
}
