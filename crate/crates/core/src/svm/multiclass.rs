use super::calibration::{couple_pairwise, fit_sigmoid, Sigmoid};
use super::smo::{train_binary, BinarySvmModel};
use super::{Gamma, SvmConfig};
use crate::error::{Error, Result};

/// Binary model for classes `positive < negative`; a positive decision is a
/// vote for `positive`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairModel {
    pub positive: usize,
    pub negative: usize,
    pub model: BinarySvmModel,
    pub calibration: Option<Sigmoid>,
}

/// One-against-one multiclass RBF SVM.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub class_count: usize,
    /// Classes with at least one training example, ascending.
    pub classes: Vec<usize>,
    pub pairs: Vec<PairModel>,
    pub gamma: f64,
    pub dim: usize,
    pub config: SvmConfig,
}

pub fn train_multiclass(
    x: &[Vec<f64>],
    y: &[usize],
    class_count: usize,
    config: &SvmConfig,
) -> Result<SvmModel> {
    config.validate()?;
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            found: y.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= class_count) {
        return Err(Error::Domain(format!(
            "class code {bad} out of range for {class_count} classes"
        )));
    }
    let dim = x[0].len();
    if let Some(row) = x.iter().find(|r| r.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            found: row.len(),
        });
    }

    let mut members = vec![Vec::new(); class_count];
    for (t, &c) in y.iter().enumerate() {
        members[c].push(t);
    }
    let classes: Vec<usize> = (0..class_count)
        .filter(|&c| !members[c].is_empty())
        .collect();
    if classes.len() < 2 {
        return Err(Error::SingleClass);
    }

    let gamma = config.gamma.resolve(x)?;
    let pair_config = SvmConfig {
        gamma: Gamma::Fixed(gamma),
        ..*config
    };

    let mut pairs = Vec::with_capacity(classes.len() * (classes.len() - 1) / 2);
    for (ia, &a) in classes.iter().enumerate() {
        for &b in &classes[ia + 1..] {
            let idx: Vec<usize> = members[a].iter().chain(&members[b]).copied().collect();
            let px: Vec<Vec<f64>> = idx.iter().map(|&t| x[t].clone()).collect();
            let py: Vec<i8> = idx
                .iter()
                .map(|&t| if y[t] == a { 1 } else { -1 })
                .collect();
            let model = train_binary(&px, &py, &pair_config)?;
            let calibration = config.calibrate.then(|| {
                let decisions: Vec<f64> = px.iter().map(|r| model.decision_unchecked(r)).collect();
                let positive: Vec<bool> = py.iter().map(|&v| v > 0).collect();
                fit_sigmoid(&decisions, &positive)
            });
            pairs.push(PairModel {
                positive: a,
                negative: b,
                model,
                calibration,
            });
        }
    }

    Ok(SvmModel {
        class_count,
        classes,
        pairs,
        gamma,
        dim,
        config: *config,
    })
}

/// One-against-one vote over `(positive, negative, decision)` triples.
///
/// Most votes wins. Ties go to the class with the larger sum of `|decision|`
/// over the contests it won, then to the lowest class code.
pub fn vote(class_count: usize, decisions: &[(usize, usize, f64)]) -> usize {
    let mut votes = vec![0usize; class_count];
    let mut margins = vec![0.0f64; class_count];
    for &(a, b, d) in decisions {
        let winner = if d > 0.0 { a } else { b };
        votes[winner] += 1;
        margins[winner] += d.abs();
    }
    let mut best = 0;
    for c in 1..class_count {
        if votes[c] > votes[best] || (votes[c] == votes[best] && margins[c] > margins[best]) {
            best = c;
        }
    }
    best
}

impl SvmModel {
    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn decisions(&self, x: &[f64]) -> Result<Vec<(usize, usize, f64)>> {
        self.check_dim(x)?;
        Ok(self
            .pairs
            .iter()
            .map(|p| (p.positive, p.negative, p.model.decision_unchecked(x)))
            .collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(vote(self.class_count, &self.decisions(x)?))
    }

    pub fn is_calibrated(&self) -> bool {
        !self.pairs.is_empty() && self.pairs.iter().all(|p| p.calibration.is_some())
    }

    /// Posterior over all `class_count` classes; absent classes get zero.
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        if !self.is_calibrated() {
            return Err(Error::Uncalibrated);
        }
        self.check_dim(x)?;
        const CLAMP: f64 = 1e-7;

        let k = self.classes.len();
        let slot = |c: usize| {
            self.classes
                .binary_search(&c)
                .expect("pair class is present")
        };
        let mut r = vec![vec![0.0; k]; k];
        for p in &self.pairs {
            let sigmoid = p.calibration.expect("checked above");
            let prob = sigmoid
                .probability(p.model.decision_unchecked(x))
                .clamp(CLAMP, 1.0 - CLAMP);
            let (i, j) = (slot(p.positive), slot(p.negative));
            r[i][j] = prob;
            r[j][i] = 1.0 - prob;
        }
        let coupled = couple_pairwise(&r);
        let mut out = vec![0.0; self.class_count];
        for (&c, p) in self.classes.iter().zip(coupled) {
            out[c] = p;
        }
        Ok(out)
    }
}
