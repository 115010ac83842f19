//! Stratified k-fold cross-validation of a fixed feature subset.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{flat_indices, FeatureIndex, FeatureMatrix};
use crate::landmarks::ExpressionLabel;
use crate::svm::{train_multiclass, Gamma, SvmConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub folds: usize,
    pub seed: u64,
    pub svm: SvmConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            folds: 10,
            seed: 0,
            svm: SvmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Partition example positions into `folds` stratified test folds.
///
/// Within each class the members are shuffled and dealt round-robin, so the
/// per-class fold sizes differ by at most one. The dealing position carries
/// over from one class to the next to keep total fold sizes even.
pub fn stratified_kfold(labels: &[ExpressionLabel], folds: usize, seed: u64) -> Result<Vec<Fold>> {
    if folds < 2 {
        return Err(Error::Config(format!(
            "at least 2 folds required, got {folds}"
        )));
    }
    if labels.is_empty() {
        return Err(Error::NoExamples);
    }
    let mut by_class = vec![Vec::new(); ExpressionLabel::COUNT];
    for (i, l) in labels.iter().enumerate() {
        by_class[l.code()].push(i);
    }
    for (code, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < folds {
            return Err(Error::ClassTooSmall {
                class: ExpressionLabel::ALL[code].to_string(),
                count: members.len(),
                needed: folds,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; labels.len()];
    let mut offset = 0;
    for mut members in by_class {
        members.shuffle(&mut rng);
        for (p, &e) in members.iter().enumerate() {
            assignment[e] = (offset + p) % folds;
        }
        offset = (offset + members.len()) % folds;
    }

    Ok((0..folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..labels.len()).partition(|&e| assignment[e] == f);
            Fold { train, test }
        })
        .collect())
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    class_count: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(class_count: usize) -> Self {
        ConfusionMatrix {
            class_count,
            counts: vec![0; class_count * class_count],
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if counts.iter().any(|r| r.len() != k) {
            return Err(Error::Domain("confusion matrix must be square".into()));
        }
        Ok(ConfusionMatrix {
            class_count: k,
            counts: counts.into_iter().flatten().collect(),
        })
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.class_count + predicted] += 1;
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.class_count + predicted]
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_total(&self, truth: usize) -> u64 {
        self.row(truth).iter().sum()
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.class_count..(truth + 1) * self.class_count]
    }

    pub fn diagonal_total(&self) -> u64 {
        (0..self.class_count).map(|c| self.get(c, c)).sum()
    }

    /// Row-normalized view; `None` flags rows without examples.
    pub fn row_normalized(&self) -> Vec<Option<Vec<f64>>> {
        (0..self.class_count)
            .map(|t| {
                let total = self.row_total(t);
                (total > 0).then(|| {
                    self.row(t)
                        .iter()
                        .map(|&v| v as f64 / total as f64)
                        .collect()
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    /// Diagonal of the row-normalized matrix; `None` for absent classes.
    pub per_class: Vec<Option<f64>>,
    pub mean_class_accuracy: f64,
}

impl Metrics {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Self {
        let total = cm.total();
        let accuracy = if total == 0 {
            0.0
        } else {
            cm.diagonal_total() as f64 / total as f64
        };
        let per_class: Vec<Option<f64>> = cm
            .row_normalized()
            .into_iter()
            .enumerate()
            .map(|(c, row)| row.map(|r| r[c]))
            .collect();
        let present: Vec<f64> = per_class.iter().flatten().copied().collect();
        let mean_class_accuracy = if present.is_empty() {
            0.0
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        };
        Metrics {
            accuracy,
            per_class,
            mean_class_accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    /// Out-of-fold prediction for every example, in dataset order.
    pub predictions: Vec<ExpressionLabel>,
    /// How many times each example was tested.
    pub test_counts: Vec<usize>,
    /// Correct predictions counted while streaming through the folds.
    pub streamed_correct: u64,
    pub folds: usize,
    pub seed: u64,
    pub svm: SvmConfig,
}

impl CvReport {
    /// `accuracy=<x> mean_class_accuracy=<y> folds=<k> seed=<s>`
    pub fn summary_line(&self) -> String {
        format!(
            "accuracy={:.6} mean_class_accuracy={:.6} folds={} seed={}",
            self.metrics.accuracy, self.metrics.mean_class_accuracy, self.folds, self.seed
        )
    }
}

/// Cross-validated confusion matrix and metrics for one feature subset.
pub fn cross_validate(
    matrix: &FeatureMatrix,
    subset: &[FeatureIndex],
    config: &EvalConfig,
) -> Result<CvReport> {
    config.svm.validate()?;
    if subset.is_empty() {
        return Err(Error::Domain(
            "cannot evaluate an empty feature subset".into(),
        ));
    }
    let flats = flat_indices(subset, matrix.landmark_count)?;
    let folds = stratified_kfold(&matrix.labels, config.folds, config.seed)?;

    let fold_results = folds
        .par_iter()
        .map(|fold| {
            let x_train = matrix.normalized_rows(&flats, &fold.train)?;
            let y_train: Vec<usize> = fold
                .train
                .iter()
                .map(|&e| matrix.labels[e].code())
                .collect();
            let model = train_multiclass(&x_train, &y_train, ExpressionLabel::COUNT, &config.svm)?;
            let x_test = matrix.normalized_rows(&flats, &fold.test)?;
            x_test
                .iter()
                .zip(&fold.test)
                .map(|(x, &e)| model.predict(x).map(|p| (e, p)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let k = ExpressionLabel::COUNT;
    let mut confusion = ConfusionMatrix::new(k);
    let mut predictions = vec![ExpressionLabel::Anger; matrix.len()];
    let mut test_counts = vec![0usize; matrix.len()];
    let mut streamed_correct = 0u64;
    for results in &fold_results {
        let mut fold_matrix = ConfusionMatrix::new(k);
        for &(e, p) in results {
            let truth = matrix.labels[e].code();
            fold_matrix.add(truth, p);
            predictions[e] = ExpressionLabel::ALL[p];
            test_counts[e] += 1;
            if truth == p {
                streamed_correct += 1;
            }
        }
        confusion.merge(&fold_matrix);
    }

    Ok(CvReport {
        metrics: Metrics::from_confusion(&confusion),
        confusion,
        predictions,
        test_counts,
        streamed_correct,
        folds: config.folds,
        seed: config.seed,
        svm: config.svm,
    })
}

/// Coarse search over `C` and `gamma` multipliers of the `scale` heuristic,
/// keeping the first configuration with the best cross-validated accuracy.
pub fn grid_search(
    matrix: &FeatureMatrix,
    subset: &[FeatureIndex],
    config: &EvalConfig,
) -> Result<CvReport> {
    const C_GRID: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
    const GAMMA_GRID: [f64; 4] = [0.01, 0.1, 1.0, 10.0];
    let mut best: Option<CvReport> = None;
    for c in C_GRID {
        for g in GAMMA_GRID {
            let candidate = EvalConfig {
                svm: SvmConfig {
                    c,
                    gamma: Gamma::Scale(g),
                    ..config.svm
                },
                ..config.clone()
            };
            let report = cross_validate(matrix, subset, &candidate)?;
            log::info!(
                "grid C={c} gamma=scale*{g}: accuracy {:.4}",
                report.metrics.accuracy
            );
            if best
                .as_ref()
                .is_none_or(|b| report.metrics.accuracy > b.metrics.accuracy)
            {
                best = Some(report);
            }
        }
    }
    Ok(best.expect("grid is non-empty"))
}

/// Round half away from zero to two decimals.
pub fn format_two_decimals(value: f64) -> String {
    format!("{:.2}", (value * 100.0).round() / 100.0)
}

/// Row-normalized table in canonical label order, two decimals per cell.
pub fn render_confusion(cm: &ConfusionMatrix, labels: &[ExpressionLabel]) -> Result<String> {
    if labels.len() != cm.class_count() {
        return Err(Error::Dimension {
            expected: cm.class_count(),
            found: labels.len(),
        });
    }
    let name_width = labels
        .iter()
        .map(|l| l.name().len())
        .max()
        .unwrap_or(0)
        .max(4);
    let mut out = format!("{:<name_width$}", "");
    for l in labels {
        let _ = write!(out, " {:>name_width$}", l.name());
    }
    out.push('\n');
    for (t, row) in cm.row_normalized().into_iter().enumerate() {
        let _ = write!(out, "{:<name_width$}", labels[t].name());
        match row {
            Some(values) => {
                for v in values {
                    let _ = write!(out, " {:>name_width$}", format_two_decimals(v));
                }
            }
            None => {
                for _ in 0..labels.len() {
                    let _ = write!(out, " {:>name_width$}", "-");
                }
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Raw counts as CSV: header `true,<labels...>`, one row per true class.
pub fn counts_csv(cm: &ConfusionMatrix, labels: &[ExpressionLabel]) -> String {
    let mut out = String::from("true");
    for l in labels {
        let _ = write!(out, ",{}", l.name());
    }
    out.push('\n');
    for (t, l) in labels.iter().enumerate() {
        out.push_str(l.name());
        for v in cm.row(t) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}
