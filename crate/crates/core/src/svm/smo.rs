//! Binary soft-margin SVM trained by sequential minimal optimization.
//!
//! Dual problem: minimize `0.5 a'Qa - sum(a)` subject to `0 <= a <= C` and
//! `y'a = 0`, with `Q_st = y_s y_t K(x_s, x_t)`. Each step updates the
//! maximal violating pair; training stops once the violation drops below
//! the configured tolerance.

use super::kernel::{kernel_matrix, squared_distance};
use super::SvmConfig;
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_k * y_k` for each support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    /// Position of each support vector in the training set.
    pub support_indices: Vec<usize>,
    pub dim: usize,
    pub iterations: usize,
}

impl BinarySvmModel {
    /// `sum_k coef_k K(sv_k, x) + bias`.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(self.decision_unchecked(x))
    }

    pub(crate) fn decision_unchecked(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, coef)| coef * (-self.gamma * squared_distance(sv, x)).exp())
            .sum::<f64>()
            + self.bias
    }
}

fn check_inputs(x: &[Vec<f64>], y: &[i8]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            found: y.len(),
        });
    }
    let dim = x[0].len();
    if let Some(row) = x.iter().find(|r| r.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            found: row.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&v| v != 1 && v != -1) {
        return Err(Error::Domain(format!(
            "binary labels must be -1 or +1, got {bad}"
        )));
    }
    if !(y.contains(&1) && y.contains(&-1)) {
        return Err(Error::SingleClass);
    }
    Ok(dim)
}

#[inline]
fn in_up(alpha: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && alpha < c) || (y < 0.0 && alpha > 0.0)
}

#[inline]
fn in_low(alpha: f64, y: f64, c: f64) -> bool {
    (y < 0.0 && alpha < c) || (y > 0.0 && alpha > 0.0)
}

/// Maximal violating pair `(i, j, m - M)` for gradient `grad`.
fn select_pair(alpha: &[f64], y: &[f64], grad: &[f64], c: f64) -> Option<(usize, usize, f64)> {
    let mut best_up: Option<(usize, f64)> = None;
    let mut best_low: Option<(usize, f64)> = None;
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        if in_up(alpha[t], y[t], c) && best_up.is_none_or(|(_, m)| v > m) {
            best_up = Some((t, v));
        }
        if in_low(alpha[t], y[t], c) && best_low.is_none_or(|(_, m)| v < m) {
            best_low = Some((t, v));
        }
    }
    let ((i, m), (j, big_m)) = (best_up?, best_low?);
    Some((i, j, m - big_m))
}

/// Bias from the final gradient: mean over free variables, otherwise the
/// midpoint of the feasible interval.
fn bias_from_gradient(alpha: &[f64], y: &[f64], grad: &[f64], c: f64) -> f64 {
    let mut upper = f64::INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else {
            free_sum += yg;
            free_count += 1;
        }
    }
    let rho = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        (upper + lower) / 2.0
    };
    -rho
}

pub fn train_binary(x: &[Vec<f64>], y: &[i8], config: &SvmConfig) -> Result<BinarySvmModel> {
    config.validate()?;
    let dim = check_inputs(x, y)?;
    let gamma = config.gamma.resolve(x)?;
    let c = config.c;
    let n = x.len();
    let k = kernel_matrix(x, gamma);
    let y: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();

    let mut alpha = vec![0.0; n];
    // gradient of the dual objective: Q alpha - 1
    let mut grad = vec![-1.0; n];

    let max_iter = config.max_passes.saturating_mul(n.max(1));
    let mut iterations = 0;
    while let Some((i, j, gap)) = select_pair(&alpha, &y, &grad, c) {
        if gap < config.tolerance {
            break;
        }
        if iterations >= max_iter {
            log::warn!("SMO hit the iteration limit ({max_iter}) with KKT gap {gap:e}");
            break;
        }
        iterations += 1;

        // move alpha_i += y_i t, alpha_j -= y_j t along the equality constraint
        let curvature = (k[i * n + i] + k[j * n + j] - 2.0 * k[i * n + j]).max(TAU);
        let cap_i = if y[i] > 0.0 { c - alpha[i] } else { alpha[i] };
        let cap_j = if y[j] > 0.0 { alpha[j] } else { c - alpha[j] };
        let step = (gap / curvature).min(cap_i).min(cap_j);

        alpha[i] = if step == cap_i {
            if y[i] > 0.0 {
                c
            } else {
                0.0
            }
        } else {
            alpha[i] + y[i] * step
        };
        alpha[j] = if step == cap_j {
            if y[j] > 0.0 {
                0.0
            } else {
                c
            }
        } else {
            alpha[j] - y[j] * step
        };

        let (row_i, row_j) = (&k[i * n..(i + 1) * n], &k[j * n..(j + 1) * n]);
        for t in 0..n {
            grad[t] += y[t] * step * (row_i[t] - row_j[t]);
        }
    }

    let bias = bias_from_gradient(&alpha, &y, &grad, c);
    let support_indices: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    Ok(BinarySvmModel {
        support_vectors: support_indices.iter().map(|&t| x[t].clone()).collect(),
        dual_coefs: support_indices.iter().map(|&t| alpha[t] * y[t]).collect(),
        bias,
        gamma,
        c,
        support_indices,
        dim,
        iterations,
    })
}

/// Maximal KKT violation `m - M` of a trained model, recomputed from scratch
/// on its training data.
pub fn kkt_gap(model: &BinarySvmModel, x: &[Vec<f64>], y: &[i8]) -> f64 {
    let n = x.len();
    let y: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let mut alpha = vec![0.0; n];
    for (&t, coef) in model.support_indices.iter().zip(&model.dual_coefs) {
        alpha[t] = coef.abs();
    }
    let grad: Vec<f64> = (0..n)
        .map(|t| y[t] * (model.decision_unchecked(&x[t]) - model.bias) - 1.0)
        .collect();
    select_pair(&alpha, &y, &grad, model.c).map_or(0.0, |(_, _, gap)| gap.max(0.0))
}
