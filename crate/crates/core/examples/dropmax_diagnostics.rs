//! A dominant shared direction before and after dropmax.

use idrmap::reduction::{explained_variance_top1, fit_pca, mean_pairwise_cosine, project, DEFAULT_COSINE_SAMPLE};
use idrmap::synthbench::{generate_pair, SynthSpec};

fn main() -> idrmap::Result<()> {
    let pair = generate_pair(&SynthSpec {
        vocab: 1000,
        dim: 40,
        dominant_axis_scale: 5.0,
        ..SynthSpec::default()
    })?;
    let src = pair.src.vectors();
    let model = fit_pca(src)?;
    println!("top-1 explained variance {:.3}", explained_variance_top1(&model)?);
    println!("mean cosine raw {:.3}", mean_pairwise_cosine(src, DEFAULT_COSINE_SAMPLE, 0)?);
    for dropmax in [false, true] {
        let reduced = project(&model, src, 20, dropmax)?;
        println!(
            "dim 20 dropmax {dropmax}: retained variance {:.3}, mean cosine {:.3}",
            model.retained_variance(20, dropmax)? / model.total_variance(),
            mean_pairwise_cosine(&reduced, DEFAULT_COSINE_SAMPLE, 0)?
        );
    }
    Ok(())
}
