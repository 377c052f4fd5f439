//! Seeded synthetic embedding pairs with a known ground-truth dictionary.
//!
//! The target side is an exact rotation of the source side plus Gaussian
//! noise, with rows shuffled, so the correct translation of every source
//! word is known by construction.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::embedding_io::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::self_learning::row_normalized;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub vocab: usize,
    pub dim: usize,
    pub noise_sigma: f64,
    /// Strength of a shared dominant direction added to every source row.
    pub dominant_axis_scale: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            vocab: 1500,
            dim: 50,
            noise_sigma: 0.01,
            dominant_axis_scale: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 || self.vocab <= self.dim {
            return Err(Error::Config(format!(
                "synthetic spec needs vocab > dim >= 2, got vocab {} dim {}",
                self.vocab, self.dim
            )));
        }
        if [self.noise_sigma, self.dominant_axis_scale].iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::Config("noise and scale must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthPair {
    pub src: EmbeddingMatrix,
    pub tgt: EmbeddingMatrix,
    /// `(i, perm[i])`: source row `i` corresponds to target row `perm[i]`.
    pub gold: Dictionary,
    /// The rotation applied to the source side.
    pub rotation: DMatrix<f64>,
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Haar-distributed orthogonal matrix (QR with the sign of `diag(R)` fixed).
pub fn random_orthogonal(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let qr = nalgebra::linalg::QR::new(gaussian(dim, dim, rng));
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub fn generate_pair(spec: &SynthSpec) -> Result<SynthPair> {
    spec.validate()?;
    let (v, d) = (spec.vocab, spec.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut src = row_normalized(gaussian(v, d, &mut rng));
    let axis: DVector<f64> = {
        let g = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        g.normalize()
    };
    if spec.dominant_axis_scale > 0.0 {
        // Per-row weights scale·(1 + ξ/2): large shared mean and large
        // variance along one axis.
        for mut row in src.row_iter_mut() {
            let xi: f64 = StandardNormal.sample(&mut rng);
            let w = spec.dominant_axis_scale * (1.0 + 0.5 * xi);
            row += axis.transpose() * w;
        }
    }

    let rotation = random_orthogonal(d, &mut rng);
    let mut rotated = &src * &rotation;
    if spec.noise_sigma > 0.0 {
        rotated += gaussian(v, d, &mut rng) * spec.noise_sigma;
    }
    let rotated = row_normalized(rotated);

    let mut perm: Vec<usize> = (0..v).collect();
    perm.shuffle(&mut rng);
    let mut tgt = DMatrix::zeros(v, d);
    for (i, &p) in perm.iter().enumerate() {
        tgt.set_row(p, &rotated.row(i));
    }

    let src_words = (0..v).map(|i| format!("w{i:05}")).collect();
    let tgt_words = (0..v).map(|i| format!("t{i:05}")).collect();
    Ok(SynthPair {
        src: EmbeddingMatrix::new(src_words, src, "src")?,
        tgt: EmbeddingMatrix::new(tgt_words, tgt, "tgt")?,
        gold: perm.into_iter().enumerate().collect(),
        rotation,
    })
}
