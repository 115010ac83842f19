//! Sequential forward selection with a wrapper SVM on a stratified split.
//!
//! Each iteration appends every remaining candidate to the current subset,
//! trains a multiclass SVM on the projected and L2-normalized training
//! vectors, and keeps the candidate with the best held-out accuracy (lowest
//! flat index on ties). Selection stops when no candidate beats the current
//! accuracy by more than `min_improvement`.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{feature_dim, flat_indices, Axis, FeatureIndex, FeatureMatrix};
use crate::landmarks::ExpressionLabel;
use crate::svm::{train_multiclass, SvmConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    pub train_ratio: f64,
    pub seed: u64,
    pub svm: SvmConfig,
    pub max_features: Option<usize>,
    pub min_improvement: f64,
    /// Restrict candidates to these flat indices; `None` means all features.
    pub candidate_pool: Option<Vec<usize>>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            train_ratio: 0.6,
            seed: 0,
            svm: SvmConfig::default(),
            max_features: None,
            min_improvement: 0.0,
            candidate_pool: None,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(Error::Config(format!(
                "train_ratio must lie in (0, 1), got {}",
                self.train_ratio
            )));
        }
        if !(self.min_improvement.is_finite() && self.min_improvement >= 0.0) {
            return Err(Error::Config("min_improvement must be non-negative".into()));
        }
        self.svm.validate()
    }
}

/// Example positions of a train/test partition, each ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class seeded shuffle; class `c` with `n` examples sends
/// `round(ratio * n)`, clamped to `1..=n-1`, to the training side.
pub fn stratified_split(labels: &[ExpressionLabel], train_ratio: f64, seed: u64) -> Result<Split> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::Config(format!(
            "train_ratio must lie in (0, 1), got {train_ratio}"
        )));
    }
    let mut by_class = vec![Vec::new(); ExpressionLabel::COUNT];
    for (i, l) in labels.iter().enumerate() {
        by_class[l.code()].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for (code, mut members) in by_class.into_iter().enumerate() {
        let n = members.len();
        if n == 0 {
            continue;
        }
        if n < 2 {
            return Err(Error::ClassTooSmall {
                class: ExpressionLabel::ALL[code].to_string(),
                count: n,
                needed: 2,
            });
        }
        let n_train = ((train_ratio * n as f64).round() as usize).clamp(1, n - 1);
        members.shuffle(&mut rng);
        split.train.extend_from_slice(&members[..n_train]);
        split.test.extend_from_slice(&members[n_train..]);
    }
    split.train.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

fn score_flat(
    matrix: &FeatureMatrix,
    flats: &[usize],
    split: &Split,
    svm: &SvmConfig,
) -> Result<f64> {
    if flats.is_empty() {
        return Err(Error::Domain("cannot score an empty feature subset".into()));
    }
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::EmptyInput);
    }
    let x_train = matrix.normalized_rows(flats, &split.train)?;
    let y_train: Vec<usize> = split
        .train
        .iter()
        .map(|&e| matrix.labels[e].code())
        .collect();
    let model = train_multiclass(&x_train, &y_train, ExpressionLabel::COUNT, svm)?;

    let x_test = matrix.normalized_rows(flats, &split.test)?;
    let mut correct = 0usize;
    for (x, &e) in x_test.iter().zip(&split.test) {
        if model.predict(x)? == matrix.labels[e].code() {
            correct += 1;
        }
    }
    Ok(correct as f64 / split.test.len() as f64)
}

/// Held-out accuracy of a multiclass SVM trained on the projected, normalized subset.
///
/// A repeated index is scored as a duplicated column.
pub fn score_subset(
    matrix: &FeatureMatrix,
    subset: &[FeatureIndex],
    split: &Split,
    svm: &SvmConfig,
) -> Result<f64> {
    let flats = subset
        .iter()
        .map(|f| f.flat(matrix.landmark_count))
        .collect::<Result<Vec<_>>>()?;
    score_flat(matrix, &flats, split, svm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionStep {
    pub feature: FeatureIndex,
    pub flat: usize,
    pub accuracy: f64,
    /// Candidates scored in this iteration.
    pub evaluated: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTrace {
    pub landmark_count: usize,
    pub seed: u64,
    pub steps: Vec<SelectionStep>,
    pub final_subset: Vec<FeatureIndex>,
}

impl SelectionTrace {
    pub fn accuracies(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.accuracy).collect()
    }

    pub fn final_accuracy(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.accuracy)
    }

    pub fn flat_subset(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.flat).collect()
    }
}

/// Higher accuracy first, then lower flat index.
pub(crate) fn better(a: (f64, usize), b: (f64, usize)) -> bool {
    match a.0.total_cmp(&b.0) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => a.1 < b.1,
    }
}

/// Score every candidate appended to `selected`, in parallel.
pub fn score_candidates(
    matrix: &FeatureMatrix,
    selected: &[usize],
    candidates: &[usize],
    split: &Split,
    svm: &SvmConfig,
) -> Result<Vec<(f64, usize)>> {
    candidates
        .par_iter()
        .map(|&flat| {
            let mut subset = selected.to_vec();
            subset.push(flat);
            score_flat(matrix, &subset, split, svm).map(|acc| (acc, flat))
        })
        .collect()
}

fn candidate_pool(matrix: &FeatureMatrix, config: &SelectionConfig) -> Result<Vec<usize>> {
    let dim = matrix.dim();
    let mut pool = match &config.candidate_pool {
        Some(p) => p.clone(),
        None => (0..dim).collect(),
    };
    pool.sort_unstable();
    pool.dedup();
    if let Some(&bad) = pool.iter().find(|&&f| f >= dim) {
        return Err(Error::Domain(format!(
            "candidate {bad} out of range (dimension {dim})"
        )));
    }
    if pool.is_empty() {
        return Err(Error::Domain("empty candidate pool".into()));
    }
    Ok(pool)
}

pub fn sfs(matrix: &FeatureMatrix, config: &SelectionConfig) -> Result<SelectionTrace> {
    config.validate()?;
    if matrix.is_empty() {
        return Err(Error::NoExamples);
    }
    let split = stratified_split(&matrix.labels, config.train_ratio, config.seed)?;
    let mut remaining = candidate_pool(matrix, config)?;
    let cap = config.max_features.unwrap_or(usize::MAX);

    let mut selected: Vec<usize> = Vec::new();
    let mut steps = Vec::new();
    let mut current = 0.0;
    while selected.len() < cap && !remaining.is_empty() {
        let scores = score_candidates(matrix, &selected, &remaining, &split, &config.svm)?;
        let best = scores
            .iter()
            .copied()
            .reduce(|a, b| if better(b, a) { b } else { a })
            .expect("candidates are non-empty");
        log::debug!(
            "step {}: best candidate {} accuracy {:.4} (current {:.4})",
            steps.len() + 1,
            best.1,
            best.0,
            current
        );
        if best.0 <= current + config.min_improvement {
            break;
        }
        current = best.0;
        selected.push(best.1);
        remaining.retain(|&f| f != best.1);
        steps.push(SelectionStep {
            feature: FeatureIndex::from_flat(best.1, matrix.landmark_count)?,
            flat: best.1,
            accuracy: best.0,
            evaluated: scores.len(),
        });
        log::info!(
            "selected {} ({} features, accuracy {:.4})",
            steps.last().expect("just pushed").feature,
            selected.len(),
            current
        );
    }

    Ok(SelectionTrace {
        landmark_count: matrix.landmark_count,
        seed: config.seed,
        final_subset: steps.iter().map(|s| s.feature).collect(),
        steps,
    })
}

/// Subset file: `landmarks=<L>` then one `i,j,axis` line per feature.
pub fn format_subset(landmark_count: usize, subset: &[FeatureIndex]) -> String {
    let mut out = format!("landmarks={landmark_count}\n");
    for f in subset {
        let _ = writeln!(out, "{f}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetFile {
    pub landmark_count: usize,
    pub features: Vec<FeatureIndex>,
}

pub fn parse_subset(text: &str) -> Result<SubsetFile> {
    const CTX: &str = "subset file";
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (n, header) = lines
        .next()
        .ok_or_else(|| Error::parse(CTX, 1, "missing `landmarks=` header"))?;
    let landmark_count: usize = header
        .strip_prefix("landmarks=")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::parse(CTX, n, "expected `landmarks=<L>`"))?;

    let mut features = Vec::new();
    for (n, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [i, j, axis] = fields[..] else {
            return Err(Error::parse(CTX, n, "expected `i,j,axis`"));
        };
        let i: usize = i
            .parse()
            .map_err(|_| Error::parse(CTX, n, format!("malformed landmark {i:?}")))?;
        let j: usize = j
            .parse()
            .map_err(|_| Error::parse(CTX, n, format!("malformed landmark {j:?}")))?;
        let axis = Axis::from_short(axis).ok_or_else(|| {
            Error::parse(CTX, n, format!("axis must be `h` or `v`, got {axis:?}"))
        })?;
        let feature = FeatureIndex::new(i, j, axis, landmark_count)
            .map_err(|e| Error::parse(CTX, n, e.to_string()))?;
        features.push(feature);
    }
    flat_indices(&features, landmark_count)?;
    Ok(SubsetFile {
        landmark_count,
        features,
    })
}

pub fn save_subset(landmark_count: usize, subset: &[FeatureIndex], path: &Path) -> Result<()> {
    crate::io::write_atomic(path, format_subset(landmark_count, subset).as_bytes())
}

pub fn load_subset(path: &Path) -> Result<SubsetFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_subset(&text).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::Parse {
            context: path.display().to_string(),
            line,
            message,
        },
        other => other,
    })
}

/// Parse a subset given as flat indices, for callers that work in flat space.
pub fn subset_from_flat(flats: &[usize], landmark_count: usize) -> Result<Vec<FeatureIndex>> {
    if let Some(&bad) = flats.iter().find(|&&f| f >= feature_dim(landmark_count)) {
        return Err(Error::Domain(format!("flat index {bad} out of range")));
    }
    flats
        .iter()
        .map(|&f| FeatureIndex::from_flat(f, landmark_count))
        .collect()
}

/// Machine-readable trace: `step,i,j,axis,flat,accuracy,evaluated`.
pub fn trace_csv(trace: &SelectionTrace) -> String {
    let mut out = String::from("step,i,j,axis,flat,accuracy,evaluated\n");
    for (k, s) in trace.steps.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            k + 1,
            s.feature.i,
            s.feature.j,
            s.feature.axis.short(),
            s.flat,
            s.accuracy,
            s.evaluated
        );
    }
    out
}

pub fn parse_trace_csv(text: &str, landmark_count: usize, seed: u64) -> Result<SelectionTrace> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut steps = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = k + 2;
        let field = |i: usize| record.get(i).unwrap_or("");
        let bad = |what: &str| Error::parse("trace", line, format!("malformed {what}"));
        let i: usize = field(1).parse().map_err(|_| bad("landmark"))?;
        let j: usize = field(2).parse().map_err(|_| bad("landmark"))?;
        let axis = Axis::from_short(field(3)).ok_or_else(|| bad("axis"))?;
        let feature = FeatureIndex::new(i, j, axis, landmark_count)?;
        steps.push(SelectionStep {
            feature,
            flat: feature.flat(landmark_count)?,
            accuracy: field(5).parse().map_err(|_| bad("accuracy"))?,
            evaluated: field(6).parse().map_err(|_| bad("evaluated count"))?,
        });
    }
    Ok(SelectionTrace {
        landmark_count,
        seed,
        final_subset: steps.iter().map(|s| s.feature).collect(),
        steps,
    })
}

/// Human-readable trace table.
pub fn render_trace(trace: &SelectionTrace) -> String {
    let mut out = format!(
        "{:<5} {:<16} {:<11} {:>9} {:>10}\n",
        "step", "landmark pair", "axis", "accuracy", "evaluated"
    );
    for (k, s) in trace.steps.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:<5} {:<16} {:<11} {:>9.4} {:>10}",
            k + 1,
            format!("{} <-> {}", s.feature.i, s.feature.j),
            s.feature.axis.name(),
            s.accuracy,
            s.evaluated
        );
    }
    out
}
