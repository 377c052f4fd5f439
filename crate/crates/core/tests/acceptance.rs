//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs without network access on synthetic data and oracles.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use idrmap::cli::evaluate_predictions;
use idrmap::embedding_io::{load_gold_pairs, ResolvedGold};
use idrmap::idr::{forward_translations, idr_run_prepared, vecmap_run, IdrConfig, PreparedPair};
use idrmap::metrics::{
    accuracy_p1, corrupt_dictionary, dictionary_similarity, eigenvector_similarity, hubness, laplacian_spectrum,
    spectral_distance,
};
use idrmap::preprocess::normalize_center_normalize;
use idrmap::reduction::{fit_pca, mean_pairwise_cosine, project};
use idrmap::self_learning::{
    csls_retrieve, csls_retrieve_embeddings, mapped_objective, procrustes_step, self_learn_lenient, Direction,
    LinearMap, SelfLearnConfig,
};
use idrmap::synthbench::{generate_pair, SynthSpec};
use idrmap::Dictionary;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_idrmap")
}

fn run_cli(args: &[&str], workers: Option<&str>) -> Result<(), String> {
    let mut cmd = Command::new(bin());
    cmd.args(args);
    if let Some(w) = workers {
        cmd.env("IDRMAP_WORKERS", w);
    }
    let out = cmd.output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "idrmap {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(())
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn criterion_1() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("data");
    let out = dir.path().join("out");
    run_cli(&["synth", "--vocab", "1500", "--dim", "50", "--noise", "0.01", "--out", path(&data)], None)?;
    let start = Instant::now();
    run_cli(
        &[
            "train",
            "--mode",
            "vecmap",
            "--src-emb",
            path(&data.join("src.vec")),
            "--tgt-emb",
            path(&data.join("tgt.vec")),
            "--out",
            path(&out),
        ],
        None,
    )?;
    let elapsed = start.elapsed();
    let gold = load_gold_pairs(data.join("gold.txt")).map_err(|e| e.to_string())?;
    let predicted = load_gold_pairs(out.join("dictionary.txt")).map_err(|e| e.to_string())?;
    let row = evaluate_predictions("train", predicted.pairs(), &gold, None, None).map_err(|e| e.to_string())?;
    ensure(row.evaluated == 1500, format!("{} gold sources evaluated", row.evaluated))?;
    ensure(row.accuracy >= 0.95, format!("P@1 {:.4} < 0.95", row.accuracy))?;
    ensure(elapsed < Duration::from_secs(120), format!("took {:.1}s", elapsed.as_secs_f64()))?;
    Ok(format!("P@1 {:.4} in {:.1}s", row.accuracy, elapsed.as_secs_f64()))
}

fn criterion_2() -> Check {
    let pair = generate_pair(&SynthSpec {
        vocab: 800,
        dim: 24,
        noise_sigma: 0.02,
        seed: 11,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let cfg = IdrConfig {
        initial_dim: 24,
        dropmax: false,
        num_seeds: 1,
        bridge_vocab: 500,
        init_vocab: 800,
        self_learn: SelfLearnConfig {
            seed: 5,
            ..Default::default()
        },
        ..Default::default()
    };
    let prepared = PreparedPair::new(pair.src.vectors(), pair.tgt.vectors()).map_err(|e| e.to_string())?;
    let idr = idr_run_prepared(&prepared, &cfg, None).map_err(|e| e.to_string())?;

    let x = normalize_center_normalize(pair.src.vectors()).map_err(|e| e.to_string())?;
    let z = normalize_center_normalize(pair.tgt.vectors()).map_err(|e| e.to_string())?;
    let direct = vecmap_run(&x, &z, cfg.init_vocab, &cfg.self_learn).map_err(|e| e.to_string())?;

    ensure(idr.steps.len() == 1, format!("{} steps", idr.steps.len()))?;
    ensure(idr.map == direct.map, "maps differ")?;
    ensure(idr.dictionary == direct.dictionary, "dictionaries differ")?;
    ensure(
        idr.objective.to_bits() == direct.objective.to_bits(),
        format!("objectives {} vs {}", idr.objective, direct.objective),
    )?;
    ensure(idr.steps[0].iterations == direct.trace.len(), "iteration counts differ")?;
    Ok(format!(
        "identical map, dictionary ({} pairs) and objective after {} iterations",
        direct.dictionary.len(),
        direct.trace.len()
    ))
}

fn criterion_3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_gap = 0.0f64;
    let mut min_margin = f64::INFINITY;
    for _ in 0..50 {
        let d = rng.random_range(2..12);
        let n = rng.random_range(d + 5..60);
        let x = common::gaussian(n, d, &mut rng);
        let y = common::gaussian(n, d, &mut rng);
        let pairs = rng.random_range(1..2 * n);
        let dict: Dictionary = (0..pairs).map(|_| (rng.random_range(0..n), rng.random_range(0..n))).collect();

        let mut m = DMatrix::zeros(d, d);
        for &(i, j) in dict.pairs() {
            for a in 0..d {
                for b in 0..d {
                    m[(a, b)] += x[(i, a)] * y[(j, b)];
                }
            }
        }
        let nuclear = common::nuclear_norm(&m);
        let (map, _) = procrustes_step(&x, &y, &dict).map_err(|e| e.to_string())?;
        let objective = mapped_objective(&x, &y, &dict, &map).map_err(|e| e.to_string())?;
        let gap = (objective - nuclear).abs();
        worst_gap = worst_gap.max(gap);
        ensure(gap <= 1e-8 * nuclear.max(1.0), format!("objective {objective} vs nuclear norm {nuclear}"))?;

        for _ in 0..100 {
            let random = LinearMap {
                w_src: common::gram_schmidt_orthogonal(d, &mut rng),
                w_tgt: common::gram_schmidt_orthogonal(d, &mut rng),
                final_chain: None,
            };
            let other = mapped_objective(&x, &y, &dict, &random).map_err(|e| e.to_string())?;
            ensure(other <= objective + 1e-9, format!("random maps reach {other} > {objective}"))?;
            min_margin = min_margin.min(objective - other);
        }
    }
    Ok(format!(
        "max |objective - nuclear| {worst_gap:.2e}; smallest margin over random maps {min_margin:.3e}"
    ))
}

fn criterion_4() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut compared = 0;
    for case in 0..50 {
        let sim = common::uniform(50, 50, &mut rng);
        for k in [1, 5, 10] {
            let (fwd, bwd) = common::brute_csls(&sim, k);
            let expected: Vec<(usize, usize)> = fwd.iter().chain(&bwd).copied().collect();
            let got = csls_retrieve(&sim, k, Direction::Union).map_err(|e| e.to_string())?;
            ensure(got.pairs() == expected.as_slice(), format!("dense mismatch at case {case}, k {k}"))?;
            compared += 1;
        }
    }
    // The blocked retrieval over embeddings against the same oracle.
    for case in 0..10 {
        let x = common::gaussian(50, 8, &mut rng);
        let z = common::gaussian(50, 8, &mut rng);
        let sim = &x * z.transpose();
        for k in [1, 5, 10] {
            let (fwd, bwd) = common::brute_csls(&sim, k);
            let r = csls_retrieve_embeddings(&x, &z, k, Direction::Union, None).map_err(|e| e.to_string())?;
            let expected: Vec<(usize, usize)> = fwd.iter().chain(&bwd).copied().collect();
            ensure(r.dictionary.pairs() == expected.as_slice(), format!("blocked mismatch at case {case}, k {k}"))?;
        }
    }
    Ok(format!("{compared} dense and 30 blocked retrievals match the brute-force oracle"))
}

fn criterion_5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_value = 0.0f64;
    let mut worst_vector = 0.0f64;
    for case in 0..20 {
        let d = rng.random_range(2..=50);
        let n = rng.random_range(d + 1..=500);
        // Distinct column scales keep the eigenvalues well separated.
        let mut x = common::gaussian(n, d, &mut rng);
        for j in 0..d {
            let s = 1.0 + 0.5 * j as f64;
            x.column_mut(j).scale_mut(s);
        }
        let model = fit_pca(&x).map_err(|e| e.to_string())?;
        let cov = common::covariance(&x);
        let (values, vectors) = common::jacobi_eigen(&cov);
        for i in 0..d {
            let dv = (model.eigenvalues()[i] - values[i]).abs();
            worst_value = worst_value.max(dv);
            ensure(dv <= 1e-8, format!("case {case}: eigenvalue {i} differs by {dv:e}"))?;
            let dot = model.eigenvectors().column(i).dot(&vectors.column(i)).abs();
            worst_vector = worst_vector.max((1.0 - dot).abs());
            let diff = (model.eigenvectors().column(i) - vectors.column(i)).amax()
                .min((model.eigenvectors().column(i) + vectors.column(i)).amax());
            ensure(diff <= 1e-8, format!("case {case}: eigenvector {i} differs by {diff:e}"))?;
        }
        // Retained variance equals the variance of the projected data.
        let total: f64 = (0..d).map(|i| cov[(i, i)]).sum();
        ensure(
            (model.total_variance() - total).abs() <= 1e-8 * total,
            format!("case {case}: total variance"),
        )?;
        for (m, dropmax) in [(d / 2, false), (d / 2, true), (d, false), (d - 1, true)] {
            if m == 0 {
                continue;
            }
            let proj = project(&model, &x, m, dropmax).map_err(|e| e.to_string())?;
            let pc = common::covariance(&proj);
            let projected: f64 = (0..m).map(|i| pc[(i, i)]).sum();
            let retained = model.retained_variance(m, dropmax).map_err(|e| e.to_string())?;
            ensure(
                (projected - retained).abs() <= 1e-8 * total,
                format!("case {case}: retained variance {retained} vs projected {projected}"),
            )?;
        }
    }
    Ok(format!("max eigenvalue error {worst_value:.2e}, max 1-|cos| {worst_vector:.2e}"))
}

fn criterion_6() -> Check {
    let pair = generate_pair(&SynthSpec {
        dominant_axis_scale: 5.0,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let mut details = Vec::new();
    for (name, emb) in [("src", pair.src.vectors()), ("tgt", pair.tgt.vectors())] {
        let before = mean_pairwise_cosine(emb, 2_000_000, 0).map_err(|e| e.to_string())?;
        let model = fit_pca(emb).map_err(|e| e.to_string())?;
        let projected = project(&model, emb, emb.ncols() / 2, true).map_err(|e| e.to_string())?;
        let after = mean_pairwise_cosine(&projected, 2_000_000, 0).map_err(|e| e.to_string())?;
        ensure(before >= 0.8, format!("{name}: cosine before {before:.4} < 0.8"))?;
        ensure(after <= 0.1, format!("{name}: cosine after {after:.4} > 0.1"))?;
        details.push(format!("{name} {before:.3} -> {after:.3}"));
    }
    Ok(details.join(", "))
}

fn criterion_7() -> Check {
    let pair = generate_pair(&SynthSpec {
        dominant_axis_scale: 1.0,
        seed: 7,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let tgt = pair.tgt.vectors();
    let gold = ResolvedGold::from_dictionary(&pair.gold);
    let same = dictionary_similarity(&pair.gold, &gold, tgt).map_err(|e| e.to_string())?;
    ensure(same.value == 1.0, format!("gold vs gold {}", same.value))?;

    let corpus = common::brute_mean_cosine(tgt);
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let corrupted = corrupt_dictionary(&pair.gold, 1.0, tgt.nrows(), &mut rng);
        let sim = dictionary_similarity(&corrupted, &gold, tgt).map_err(|e| e.to_string())?.value;
        worst = worst.max((sim - corpus).abs());
        ensure(
            (sim - corpus).abs() <= 0.05,
            format!("seed {seed}: corrupted similarity {sim:.4} vs mean cosine {corpus:.4}"),
        )?;
    }
    Ok(format!("gold = 1.0; corpus mean cosine {corpus:.4}, largest deviation {worst:.4}"))
}

fn six_points_on_circle() -> DMatrix<f64> {
    DMatrix::from_fn(6, 2, |i, j| {
        let a = std::f64::consts::TAU * i as f64 / 6.0;
        if j == 0 {
            a.cos()
        } else {
            a.sin()
        }
    })
}

fn three_pairs() -> DMatrix<f64> {
    // Three tight pairs of directions, far apart from each other.
    let angles: [f64; 6] = [0.0, 0.1, 2.0, 2.1, 4.0, 4.1];
    DMatrix::from_fn(6, 2, |i, j| if j == 0 { angles[i].cos() } else { angles[i].sin() })
}

fn criterion_8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let e = common::gaussian(300, 20, &mut rng);
    let same = eigenvector_similarity(&e, &e, 300, 10).map_err(|e| e.to_string())?;
    ensure(same == 0.0, format!("identical inputs give {same}"))?;

    // Hand oracle: the 2-NN graph of six points on a circle is the 6-cycle,
    // whose Laplacian spectrum is 2 - 2cos(2πk/6) = {4, 3, 3, 1, 1, 0}; the
    // 1-NN graph of three separated pairs is three disjoint edges with
    // spectrum {2, 2, 2, 0, 0, 0}.
    let cycle = [4.0, 3.0, 3.0, 1.0, 1.0, 0.0];
    let edges = [2.0, 2.0, 2.0, 0.0, 0.0, 0.0];
    let cutoff = |s: &[f64]| {
        let total: f64 = s.iter().sum();
        let mut acc = 0.0;
        s.iter()
            .position(|&l| {
                acc += l;
                acc >= 0.9 * total
            })
            .map(|p| p + 1)
            .unwrap()
    };
    let k = cutoff(&cycle).min(cutoff(&edges));
    let expected: f64 = (0..k).map(|i| (cycle[i] - edges[i]).powi(2)).sum();

    let mut a = idrmap::metrics::knn_adjacency(&six_points_on_circle(), 2);
    let got_cycle = laplacian_spectrum(&a);
    a = idrmap::metrics::knn_adjacency(&three_pairs(), 1);
    let got_edges = laplacian_spectrum(&a);
    for (g, w) in got_cycle.iter().zip(&cycle).chain(got_edges.iter().zip(&edges)) {
        ensure((g - w).abs() <= 1e-8, format!("eigenvalue {g} vs {w}"))?;
    }
    let direct = spectral_distance(&got_cycle, &got_edges);
    ensure((direct - expected).abs() <= 1e-8, format!("Δ {direct} vs {expected}"))?;
    ensure(
        (spectral_distance(&got_edges, &got_cycle) - expected).abs() <= 1e-8,
        "Δ not symmetric",
    )?;
    Ok(format!("identical → 0, constructed graphs Δ = {direct:.10} (oracle {expected})"))
}

fn criterion_9() -> Check {
    let n = 7;
    // All sources closest to target 0.
    let tgt = DMatrix::<f64>::identity(n, n);
    let src = DMatrix::from_fn(n, n, |i, j| if j == 0 { 1.0 } else if i == j { 0.5 } else { 0.0 });
    let h_one = hubness(&src, &tgt).map_err(|e| e.to_string())?;
    ensure((h_one - 1.0 / n as f64).abs() < 1e-15, format!("all-to-one H {h_one}"))?;
    let h_all = hubness(&tgt, &tgt).map_err(|e| e.to_string())?;
    ensure(h_all == 1.0, format!("distinct-NN H {h_all}"))?;
    Ok(format!("all-to-one H = {h_one:.4} (1/{n}), distinct H = {h_all}"))
}

fn criterion_10() -> Check {
    let pair = generate_pair(&SynthSpec::default()).map_err(|e| e.to_string())?;
    let x = normalize_center_normalize(pair.src.vectors()).map_err(|e| e.to_string())?;
    let z = normalize_center_normalize(pair.tgt.vectors()).map_err(|e| e.to_string())?;
    let gold = ResolvedGold::from_dictionary(&pair.gold);
    let cfg = SelfLearnConfig::default();
    let fractions = [0.0, 0.5, 0.8, 0.9, 0.95, 0.97, 0.98, 0.99, 1.0];
    let mut points = Vec::new();
    for &f in &fractions {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let seed = corrupt_dictionary(&pair.gold, f, z.nrows(), &mut rng);
        let sim = dictionary_similarity(&seed, &gold, &z).map_err(|e| e.to_string())?.value;
        let outcome = self_learn_lenient(&x, &z, &seed, &cfg).map_err(|e| e.to_string())?;
        let forward = forward_translations(&outcome.map, &x, &z, cfg.csls_k).map_err(|e| e.to_string())?;
        let acc = accuracy_p1(&forward.into_iter().enumerate().collect(), &gold).map_err(|e| e.to_string())?;
        points.push((f, sim, acc));
    }
    let summary: Vec<String> = points
        .iter()
        .map(|(f, s, a)| format!("{f}:{s:.3}/{:.1}%", 100.0 * a))
        .collect();
    let jump = points
        .windows(2)
        .map(|w| (w[0].2 - w[1].2).abs())
        .fold(0.0, f64::max);
    ensure(jump >= 0.5, format!("largest adjacent jump {:.1} points; {}", 100.0 * jump, summary.join(" ")))?;
    Ok(format!(
        "largest adjacent jump {:.1} points (fraction:similarity/accuracy {})",
        100.0 * jump,
        summary.join(" ")
    ))
}

fn criterion_11() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("data");
    run_cli(
        &["synth", "--vocab", "700", "--dim", "32", "--dominant-scale", "2", "--seed", "3", "--out", path(&data)],
        None,
    )?;
    let mut outputs = Vec::new();
    for (run, workers) in [("a", "1"), ("b", "4"), ("c", "2")] {
        let out = dir.path().join(run);
        let mut args = vec![
            "train",
            "--mode",
            "idr",
            "--init-dim",
            "8",
            "--bridge-k",
            "500",
            "--seeds",
            "2",
            "--src-emb",
            path(&data.join("src.vec")),
            "--tgt-emb",
            path(&data.join("tgt.vec")),
            "--out",
            path(&out),
        ]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
        if run == "c" {
            // Replay through the config file written by the first run.
            args = vec![
                "train".into(),
                "--config".into(),
                dir.path().join("a").join("config.txt").display().to_string(),
                "--out".into(),
                path(&out).to_string(),
            ];
        }
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        run_cli(&refs, Some(workers))?;
        let dict = fs::read(out.join("dictionary.txt")).map_err(|e| e.to_string())?;
        let mapped = fs::read(out.join("src.mapped.vec")).map_err(|e| e.to_string())?;
        outputs.push((dict, mapped));
    }
    for (i, o) in outputs.iter().enumerate().skip(1) {
        ensure(o.0 == outputs[0].0, format!("dictionary of run {i} differs"))?;
        ensure(o.1 == outputs[0].1, format!("mapped embeddings of run {i} differ"))?;
    }
    Ok(format!(
        "3 runs (1, 4, 2 workers; last replayed from config) produced identical {}-byte dictionaries",
        outputs[0].0.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 11] = [
        ("rotation recovery via train --mode vecmap", criterion_1),
        ("IDR equivalence ablation", criterion_2),
        ("Procrustes optimality", criterion_3),
        ("CSLS oracle", criterion_4),
        ("PCA oracle", criterion_5),
        ("dropmax effect", criterion_6),
        ("dictionary similarity", criterion_7),
        ("eigenvector similarity", criterion_8),
        ("hubness", criterion_9),
        ("threshold gap", criterion_10),
        ("determinism", criterion_11),
    ];
    let filter: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    let suite = Instant::now();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let number = i + 1;
        if !filter.is_empty() && !filter.contains(&number) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {number:>2} {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {number:>2} {name} ({secs:.1}s): {detail}");
            }
        }
    }
    println!("acceptance: {failed} failed, {:.1}s total", suite.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
