//! Writing embeddings and dictionaries to disk and scoring a dictionary file.

use idrmap::embedding_io::{load_embeddings, load_gold_pairs, save_dictionary, save_embeddings};
use idrmap::metrics::{accuracy_p1, corrupt_dictionary, dictionary_similarity};
use idrmap::synthbench::{generate_pair, SynthSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("idrmap-files-example");
    std::fs::create_dir_all(&dir)?;
    let pair = generate_pair(&SynthSpec {
        vocab: 300,
        dim: 10,
        ..SynthSpec::default()
    })?;
    save_embeddings(&pair.src, dir.join("src.vec"))?;
    save_embeddings(&pair.tgt, dir.join("tgt.vec"))?;
    save_dictionary(&pair.gold, &pair.src, &pair.tgt, dir.join("gold.txt"))?;

    let src = load_embeddings(dir.join("src.vec"), None)?;
    let tgt = load_embeddings(dir.join("tgt.vec"), None)?;
    let gold = load_gold_pairs(dir.join("gold.txt"))?.resolve(&src, &tgt);
    println!("{} words, gold coverage {:.2}", src.vocab_size(), gold.coverage());

    let noisy = corrupt_dictionary(&pair.gold, 0.3, tgt.vocab_size(), &mut ChaCha8Rng::seed_from_u64(0));
    let sim = dictionary_similarity(&noisy, &gold, tgt.vectors())?;
    println!(
        "30% corrupted: P@1 {:.3}, dictionary similarity {:.3}",
        accuracy_p1(&noisy, &gold)?,
        sim.value
    );
    Ok(())
}
