//! Laplacian spectral distance between two embedding spaces.

use idrmap::metrics::{eigenvector_similarity, DEFAULT_GRAPH_NEIGHBORS};
use idrmap::synthbench::{generate_pair, SynthSpec};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> idrmap::Result<()> {
    let pair = generate_pair(&SynthSpec {
        vocab: 800,
        dim: 30,
        ..SynthSpec::default()
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let unrelated = DMatrix::from_fn(800, 30, |_, _| StandardNormal.sample(&mut rng));
    // Rows of the target follow a permutation, so compare the source with
    // the target rows it was built from.
    let aligned = idrmap::linalg::gather_rows(pair.tgt.vectors(), pair.gold.target_indices());
    let vocab = 500;
    let k = DEFAULT_GRAPH_NEIGHBORS;
    println!("self      {:.3}", eigenvector_similarity(pair.src.vectors(), pair.src.vectors(), vocab, k)?);
    println!("rotated   {:.3}", eigenvector_similarity(pair.src.vectors(), &aligned, vocab, k)?);
    println!("unrelated {:.3}", eigenvector_similarity(pair.src.vectors(), &unrelated, vocab, k)?);
    Ok(())
}
