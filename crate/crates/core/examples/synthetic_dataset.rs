//! Planted-feature data and the brute-force oracles.
//!
//! Checks the first forward-selection step against exhaustive size-1 search
//! and an SMO solution against the active-set dual solver.

use landmark_sfs::features::FeatureMatrix;
use landmark_sfs::selection::{score_candidates, score_subset, stratified_split, subset_from_flat};
use landmark_sfs::svm::{train_binary, Gamma, SvmConfig};
use landmark_sfs::synth::{
    dual_qp_oracle, exhaustive_best_subset, generate, random_tiny_problem, SynthSpec,
};

fn main() -> landmark_sfs::Result<()> {
    let spec = SynthSpec::with_planted_code(12, 4, 15, 3, 4.0, 1.0, 5)?;
    let synth = generate(&spec)?;
    println!(
        "{} examples, {} landmarks, planted {:?}",
        synth.dataset.len(),
        spec.landmark_count,
        synth
            .planted()
            .iter()
            .map(|f| f.to_string())
            .collect::<Vec<_>>()
    );

    let matrix = FeatureMatrix::from_dataset(&synth.dataset)?;
    let split = stratified_split(&matrix.labels, 0.6, 5)?;
    let svm = SvmConfig::default();
    let pool = synth.candidate_pool(40, 5)?;

    let (best, acc) = exhaustive_best_subset(&pool, 1, |s| {
        score_subset(
            &matrix,
            &subset_from_flat(s, matrix.landmark_count)?,
            &split,
            &svm,
        )
    })?;
    let scores = score_candidates(&matrix, &[], &pool, &split, &svm)?;
    let greedy = scores
        .iter()
        .copied()
        .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
        .expect("pool is not empty");
    println!(
        "exhaustive size-1 best: {:?} at {acc:.4}; greedy step 1: {} at {:.4}",
        best, greedy.1, greedy.0
    );

    let (x, y, c, gamma) = random_tiny_problem(3);
    let oracle = dual_qp_oracle(&x, &y, c, gamma)?;
    let config = SvmConfig {
        c,
        gamma: Gamma::Fixed(gamma),
        tolerance: 1e-8,
        ..Default::default()
    };
    let model = train_binary(&x, &y, &config)?;
    for (xi, f) in x.iter().zip(&oracle.decision_values) {
        println!("oracle {f:+.6}  smo {:+.6}", model.decision(xi)?);
    }
    Ok(())
}
