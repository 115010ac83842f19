//! Ten-fold stratified cross-validation of a fixed subset, with the
//! row-normalized confusion matrix and per-class accuracies.

use landmark_sfs::evaluation::{cross_validate, render_confusion, EvalConfig};
use landmark_sfs::features::FeatureMatrix;
use landmark_sfs::landmarks::ExpressionLabel;
use landmark_sfs::svm::SvmConfig;
use landmark_sfs::synth::{generate, SynthSpec, RECOVERY_C};

fn main() -> landmark_sfs::Result<()> {
    let synth = generate(&SynthSpec::recovery_benchmark(1))?;
    let matrix = FeatureMatrix::from_dataset(&synth.dataset)?;
    let config = EvalConfig {
        folds: 10,
        seed: 1,
        svm: SvmConfig {
            c: RECOVERY_C,
            ..Default::default()
        },
    };

    let report = cross_validate(&matrix, &synth.planted(), &config)?;
    print!(
        "{}",
        render_confusion(&report.confusion, &ExpressionLabel::ALL)?
    );
    println!("{}", report.summary_line());
    for (label, acc) in ExpressionLabel::ALL.iter().zip(&report.metrics.per_class) {
        if let Some(acc) = acc {
            println!("  {:<10} {:.3}", label.name(), acc);
        }
    }
    assert!(report.test_counts.iter().all(|&n| n == 1));
    Ok(())
}
