//! Seed self-learning with increasingly corrupted copies of the gold
//! dictionary and report (dictionary similarity, accuracy) per fraction.

use idrmap::embedding_io::ResolvedGold;
use idrmap::idr::forward_translations;
use idrmap::metrics::{accuracy_p1, corrupt_dictionary, dictionary_similarity};
use idrmap::preprocess::normalize_center_normalize;
use idrmap::self_learning::{self_learn_lenient, SelfLearnConfig};
use idrmap::synthbench::{generate_pair, SynthSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> idrmap::Result<()> {
    let pair = generate_pair(&SynthSpec::default())?;
    let src = normalize_center_normalize(pair.src.vectors())?;
    let tgt = normalize_center_normalize(pair.tgt.vectors())?;
    let gold = ResolvedGold::from_dictionary(&pair.gold);
    let cfg = SelfLearnConfig::default();
    println!("fraction,dictionary_similarity,accuracy");
    for fraction in [0.0, 0.5, 0.8, 0.9, 0.95, 0.97, 0.98, 0.99, 0.995, 1.0] {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let seed = corrupt_dictionary(&pair.gold, fraction, tgt.nrows(), &mut rng);
        let sim = dictionary_similarity(&seed, &gold, &tgt)?.value;
        let outcome = self_learn_lenient(&src, &tgt, &seed, &cfg)?;
        let forward = forward_translations(&outcome.map, &src, &tgt, cfg.csls_k)?;
        let acc = accuracy_p1(&forward.into_iter().enumerate().collect(), &gold)?;
        println!("{fraction},{sim:.4},{acc:.4}");
    }
    Ok(())
}
