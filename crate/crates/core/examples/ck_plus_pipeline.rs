//! Full pipeline on a landmark manifest: select, cross-validate, report.
//!
//! ```text
//! cargo run --release --example ck_plus_pipeline -- path/to/manifest.csv [seed]
//! ```
//!
//! Without arguments a synthetic 68-landmark set stands in for real data.

use std::path::PathBuf;

use landmark_sfs::cli::describe_feature;
use landmark_sfs::evaluation::{cross_validate, render_confusion, EvalConfig};
use landmark_sfs::features::FeatureMatrix;
use landmark_sfs::landmarks::{load_manifest, ExpressionLabel};
use landmark_sfs::selection::{sfs, SelectionConfig};
use landmark_sfs::synth::{generate, SynthSpec};

fn main() -> landmark_sfs::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let manifest = args.next().map(PathBuf::from);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let dataset = match &manifest {
        Some(path) => load_manifest(path)?,
        None => {
            println!("no manifest given, using a synthetic stand-in");
            generate(&SynthSpec::with_planted_code(68, 7, 30, 7, 4.0, 1.0, seed)?)?.dataset
        }
    };
    let counts = dataset.class_counts();
    for (label, n) in ExpressionLabel::ALL.iter().zip(counts) {
        println!("{:<10} {n}", label.name());
    }

    let matrix = FeatureMatrix::from_dataset(&dataset)?;
    let trace = sfs(
        &matrix,
        &SelectionConfig {
            seed,
            ..Default::default()
        },
    )?;
    println!(
        "selected {} of {} features:",
        trace.steps.len(),
        matrix.dim()
    );
    for step in &trace.steps {
        println!(
            "  {}  (accuracy {:.4})",
            describe_feature(&step.feature),
            step.accuracy
        );
    }

    let report = cross_validate(
        &matrix,
        &trace.final_subset,
        &EvalConfig {
            seed,
            ..Default::default()
        },
    )?;
    print!(
        "{}",
        render_confusion(&report.confusion, &ExpressionLabel::ALL)?
    );
    println!("{}", report.summary_line());
    Ok(())
}
