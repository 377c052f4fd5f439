//! Self-learning from a small seed dictionary.

use idrmap::idr::forward_translations;
use idrmap::preprocess::normalize_center_normalize;
use idrmap::self_learning::{self_learn, SelfLearnConfig};
use idrmap::synthbench::{generate_pair, SynthSpec};
use idrmap::Dictionary;

fn main() -> idrmap::Result<()> {
    let pair = generate_pair(&SynthSpec::default())?;
    let src = normalize_center_normalize(pair.src.vectors())?;
    let tgt = normalize_center_normalize(pair.tgt.vectors())?;
    for seed_size in [5, 20, 50] {
        let seed = Dictionary::new(pair.gold.pairs()[..seed_size].to_vec());
        let outcome = self_learn(&src, &tgt, &seed, &SelfLearnConfig::default())?;
        let forward = forward_translations(&outcome.map, &src, &tgt, 10)?;
        let hits = pair.gold.pairs().iter().filter(|&&(s, t)| forward[s] == t).count();
        println!(
            "seed {seed_size:>3}: P@1 {:.4} after {} iterations",
            hits as f64 / pair.gold.len() as f64,
            outcome.trace.len()
        );
    }
    Ok(())
}
