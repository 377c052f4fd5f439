//! Iterative dimension reduction on a synthetic pair, printing the step trace.

use idrmap::embedding_io::ResolvedGold;
use idrmap::idr::{dimension_schedule, idr_multi_seed, step_trace_csv, IdrConfig, PreparedPair};
use idrmap::synthbench::{generate_pair, SynthSpec};

fn main() -> idrmap::Result<()> {
    let spec = SynthSpec {
        vocab: 1500,
        dim: 64,
        noise_sigma: 0.01,
        dominant_axis_scale: 5.0,
        seed: 1,
    };
    let pair = generate_pair(&spec)?;
    let cfg = IdrConfig {
        initial_dim: 16,
        bridge_vocab: 1000,
        num_seeds: 3,
        ..Default::default()
    };
    let mut prepared = PreparedPair::new(pair.src.vectors(), pair.tgt.vectors())?;
    prepared.prepare_schedule(&dimension_schedule(&cfg, prepared.raw_dim()))?;
    let gold = ResolvedGold::from_dictionary(&pair.gold);
    let result = idr_multi_seed(&prepared, &cfg, Some(&gold))?;
    for run in &result.runs {
        println!("seed {} objective {:.4}", run.seed, run.objective);
    }
    let best = result.best();
    println!("selected seed {}", best.seed);
    print!("{}", step_trace_csv(&best.steps, true));
    Ok(())
}
