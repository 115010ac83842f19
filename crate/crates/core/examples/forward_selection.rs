//! Sequential forward selection on a planted-feature dataset.
//!
//! Seven features are planted among 380; the search runs over a pool of the
//! planted ones plus 193 pure-noise features.

use landmark_sfs::features::FeatureMatrix;
use landmark_sfs::selection::{render_trace, sfs, SelectionConfig};
use landmark_sfs::svm::SvmConfig;
use landmark_sfs::synth::{generate, SynthSpec, RECOVERY_C};

fn main() -> landmark_sfs::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let synth = generate(&SynthSpec::recovery_benchmark(seed))?;
    let matrix = FeatureMatrix::from_dataset(&synth.dataset)?;
    let pool = synth.candidate_pool(200, seed)?;

    let config = SelectionConfig {
        seed,
        svm: SvmConfig {
            c: RECOVERY_C,
            ..Default::default()
        },
        candidate_pool: Some(pool),
        ..Default::default()
    };
    let trace = sfs(&matrix, &config)?;
    print!("{}", render_trace(&trace));

    let planted = synth.planted_flat();
    for step in &trace.steps {
        let tag = if planted.contains(&step.flat) {
            "planted"
        } else {
            "noise"
        };
        println!("{:>4} {tag}", step.flat);
    }
    Ok(())
}
