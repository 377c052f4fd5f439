//! Unsupervised alignment of a synthetic rotated pair in a single space.

use std::time::Instant;

use idrmap::embedding_io::ResolvedGold;
use idrmap::idr::{forward_translations, vecmap_run};
use idrmap::metrics::accuracy_p1;
use idrmap::preprocess::normalize_center_normalize;
use idrmap::self_learning::SelfLearnConfig;
use idrmap::synthbench::{generate_pair, SynthSpec};

fn main() -> idrmap::Result<()> {
    let spec = SynthSpec::default();
    let pair = generate_pair(&spec)?;
    let start = Instant::now();
    let src = normalize_center_normalize(pair.src.vectors())?;
    let tgt = normalize_center_normalize(pair.tgt.vectors())?;
    let cfg = SelfLearnConfig::default();
    let outcome = vecmap_run(&src, &tgt, 4000, &cfg)?;
    let forward = forward_translations(&outcome.map, &src, &tgt, cfg.csls_k)?;
    let gold = ResolvedGold::from_dictionary(&pair.gold);
    let acc = accuracy_p1(&forward.into_iter().enumerate().collect(), &gold)?;
    println!(
        "vocab {} dim {}: P@1 {:.4}, objective {:.4}, {} iterations, {:?}, {:.1}s",
        spec.vocab,
        spec.dim,
        acc,
        outcome.objective,
        outcome.trace.len(),
        outcome.termination,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
