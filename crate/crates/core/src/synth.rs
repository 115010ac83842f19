//! Synthetic planted-feature datasets and brute-force reference solvers.
//!
//! Neutral frames are a fixed circular layout plus jitter. Apex frames move
//! the second landmark of each planted pair along the planted axis by a
//! class-dependent amount, then add Gaussian noise to every coordinate.
//! Moving a landmark also shifts every other pair that contains it on the
//! same axis; those byproducts are reported by [`SynthDataset::is_informative`]
//! and kept out of the noise pool.
//!
//! The oracles here deliberately share no numerical code with the SVM or
//! the selection search: the dual solver enumerates active sets and solves
//! each KKT system directly, and the subset search enumerates combinations.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::features::{feature_dim, Axis, FeatureIndex};
use crate::landmarks::{Dataset, ExpressionLabel, LandmarkFrame, Point, SequenceExample};

const BASE_RADIUS: f64 = 100.0;
const BASE_CENTER: f64 = 200.0;
const NEUTRAL_JITTER: f64 = 2.0;

pub const RECOVERY_LANDMARKS: usize = 20;
pub const RECOVERY_PER_CLASS: usize = 80;
pub const RECOVERY_AMPLITUDE: f64 = 4.0;
pub const RECOVERY_NOISE: f64 = 1.5;
/// Box constraint used with [`SynthSpec::recovery_benchmark`].
pub const RECOVERY_C: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedFeature {
    pub index: FeatureIndex,
    /// Mean displacement of landmark `index.j` along `index.axis`, per class.
    pub class_means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub landmark_count: usize,
    pub class_count: usize,
    pub examples_per_class: usize,
    pub planted: Vec<PlantedFeature>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// `count` planted features on distinct moved landmarks, with class means
    /// `amplitude * code[c][f]` from [`planted_code`].
    pub fn with_planted_code(
        landmark_count: usize,
        class_count: usize,
        examples_per_class: usize,
        count: usize,
        amplitude: f64,
        noise_sigma: f64,
        seed: u64,
    ) -> Result<Self> {
        if count == 0 || count >= landmark_count {
            return Err(Error::Config(format!(
                "need 1..{} planted features for {landmark_count} landmarks, got {count}",
                landmark_count.saturating_sub(1)
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c0de);
        // moved landmarks are >= 1 so a smaller partner always exists
        let mut movable: Vec<usize> = (1..landmark_count).collect();
        movable.shuffle(&mut rng);
        let moved = &movable[..count];
        let code = planted_code(class_count, count);

        let mut planted = Vec::with_capacity(count);
        for (f, &j) in moved.iter().enumerate() {
            let axis = if f % 2 == 0 {
                Axis::Horizontal
            } else {
                Axis::Vertical
            };
            let blocked: HashSet<usize> = moved
                .iter()
                .enumerate()
                .filter(|&(g, _)| (g % 2 == 0) == (axis == Axis::Horizontal))
                .map(|(_, &m)| m)
                .collect();
            let partners: Vec<usize> = (0..j).filter(|i| !blocked.contains(i)).collect();
            let i = *partners.choose(&mut rng).ok_or_else(|| {
                Error::Config("not enough landmarks to place planted features".into())
            })?;
            planted.push(PlantedFeature {
                index: FeatureIndex::new(i, j, axis, landmark_count)?,
                class_means: (0..class_count).map(|c| amplitude * code[c][f]).collect(),
            });
        }
        Ok(SynthSpec {
            landmark_count,
            class_count,
            examples_per_class,
            planted,
            noise_sigma,
            seed,
        })
    }

    /// Seven classes on 20 landmarks, 80 examples each, seven planted
    /// features with amplitude 4 under noise sigma 1.5.
    pub fn recovery_benchmark(seed: u64) -> Self {
        Self::with_planted_code(
            RECOVERY_LANDMARKS,
            7,
            RECOVERY_PER_CLASS,
            7,
            RECOVERY_AMPLITUDE,
            RECOVERY_NOISE,
            seed,
        )
        .expect("benchmark parameters are valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.landmark_count < 2 {
            return Err(Error::Config("at least 2 landmarks required".into()));
        }
        if !(1..=ExpressionLabel::COUNT).contains(&self.class_count) {
            return Err(Error::Config(format!(
                "class count must be 1..={}, got {}",
                ExpressionLabel::COUNT,
                self.class_count
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise_sigma must be non-negative".into()));
        }
        for p in &self.planted {
            FeatureIndex::new(p.index.i, p.index.j, p.index.axis, self.landmark_count)?;
            if p.class_means.len() != self.class_count {
                return Err(Error::Config(format!(
                    "planted feature {} has {} class means, expected {}",
                    p.index,
                    p.class_means.len(),
                    self.class_count
                )));
            }
        }
        Ok(())
    }
}

/// Class-by-feature sign pattern for planted means: class `c` is `+1` on
/// feature `c mod count` and `-1` on every other feature.
///
/// Features are L2-normalized per example after projection, so a lone
/// selected feature only keeps its sign. With this code each feature still
/// singles out one class, and each further planted feature isolates another.
pub fn planted_code(class_count: usize, count: usize) -> Vec<Vec<f64>> {
    (0..class_count)
        .map(|c| {
            (0..count)
                .map(|f| if f == c % count { 1.0 } else { -1.0 })
                .collect()
        })
        .collect()
}

fn base_shape(landmark_count: usize) -> Vec<Point> {
    (0..landmark_count)
        .map(|k| {
            let angle = k as f64 * std::f64::consts::TAU / landmark_count as f64;
            Point::new(
                BASE_CENTER + BASE_RADIUS * angle.cos(),
                BASE_CENTER + BASE_RADIUS * angle.sin(),
            )
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub spec: SynthSpec,
    pub dataset: Dataset,
}

pub fn generate(spec: &SynthSpec) -> Result<SynthDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let jitter = Normal::new(0.0, NEUTRAL_JITTER).expect("valid jitter");
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let base = base_shape(spec.landmark_count);

    let mut examples = Vec::with_capacity(spec.class_count * spec.examples_per_class);
    for c in 0..spec.class_count {
        for e in 0..spec.examples_per_class {
            let neutral: Vec<Point> = base
                .iter()
                .map(|p| Point::new(p.x + jitter.sample(&mut rng), p.y + jitter.sample(&mut rng)))
                .collect();
            let mut apex = neutral.clone();
            for planted in &spec.planted {
                let moved = &mut apex[planted.index.j];
                match planted.index.axis {
                    Axis::Horizontal => moved.x += planted.class_means[c],
                    Axis::Vertical => moved.y += planted.class_means[c],
                }
            }
            for p in &mut apex {
                p.x += noise.sample(&mut rng);
                p.y += noise.sample(&mut rng);
            }
            examples.push(SequenceExample::new(
                format!("c{c}_{e:03}"),
                format!("s{e:03}"),
                ExpressionLabel::ALL[c],
                LandmarkFrame::new(neutral)?,
                LandmarkFrame::new(apex)?,
            )?);
        }
    }
    Ok(SynthDataset {
        spec: spec.clone(),
        dataset: Dataset::new(spec.landmark_count, examples)?,
    })
}

impl SynthDataset {
    pub fn planted(&self) -> Vec<FeatureIndex> {
        self.spec.planted.iter().map(|p| p.index).collect()
    }

    pub fn planted_flat(&self) -> Vec<usize> {
        self.spec
            .planted
            .iter()
            .map(|p| p.index.flat(self.spec.landmark_count).expect("validated"))
            .collect()
    }

    /// Whether the feature moves with some planted displacement.
    pub fn is_informative(&self, feature: FeatureIndex) -> bool {
        self.spec.planted.iter().any(|p| {
            p.index.axis == feature.axis && (feature.i == p.index.j || feature.j == p.index.j)
        })
    }

    /// Flat indices of features that carry only noise.
    pub fn noise_features(&self) -> Vec<usize> {
        let l = self.spec.landmark_count;
        (0..feature_dim(l))
            .filter(|&f| !self.is_informative(FeatureIndex::from_flat(f, l).expect("in range")))
            .collect()
    }

    /// Sorted pool of all planted features plus seeded noise features,
    /// `size` entries in total.
    pub fn candidate_pool(&self, size: usize, seed: u64) -> Result<Vec<usize>> {
        let mut pool = self.planted_flat();
        pool.sort_unstable();
        pool.dedup();
        if size < pool.len() {
            return Err(Error::Config(format!(
                "pool of {size} cannot hold {} planted features",
                pool.len()
            )));
        }
        let mut noise = self.noise_features();
        if noise.len() < size - pool.len() {
            return Err(Error::Config(format!(
                "only {} noise features available for a pool of {size}",
                noise.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        noise.shuffle(&mut rng);
        pool.extend_from_slice(&noise[..size - pool.len()]);
        pool.sort_unstable();
        Ok(pool)
    }
}

/// Largest number of subsets [`exhaustive_best_subset`] will enumerate.
pub const MAX_ENUMERATED_SUBSETS: usize = 50_000;

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, t| acc.saturating_mul(n - t) / (t + 1))
}

/// Exhaustive search over all `size`-subsets of `pool` (sorted ascending),
/// maximizing `score`. Subsets are visited in lexicographic order and only a
/// strictly better score replaces the incumbent, so ties resolve to the
/// lexicographically smallest index list.
pub fn exhaustive_best_subset<F>(
    pool: &[usize],
    size: usize,
    mut score: F,
) -> Result<(Vec<usize>, f64)>
where
    F: FnMut(&[usize]) -> Result<f64>,
{
    let mut pool = pool.to_vec();
    pool.sort_unstable();
    pool.dedup();
    let n = pool.len();
    if size == 0 || size > n {
        return Err(Error::Domain(format!(
            "subset size {size} invalid for a pool of {n}"
        )));
    }
    let total = binomial(n, size);
    if size > 3 || n > 64 || total > MAX_ENUMERATED_SUBSETS {
        return Err(Error::Domain(format!(
            "exhaustive search over C({n}, {size}) = {total} subsets exceeds the enumeration bound"
        )));
    }

    let mut positions: Vec<usize> = (0..size).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let subset: Vec<usize> = positions.iter().map(|&p| pool[p]).collect();
        let acc = score(&subset)?;
        if best.as_ref().is_none_or(|(_, b)| acc > *b) {
            best = Some((subset, acc));
        }
        // advance to the next combination in lexicographic order
        let mut k = size;
        while k > 0 && positions[k - 1] == n - size + k - 1 {
            k -= 1;
        }
        if k == 0 {
            break;
        }
        positions[k - 1] += 1;
        for t in k..size {
            positions[t] = positions[t - 1] + 1;
        }
    }
    Ok(best.expect("at least one subset"))
}

/// Exact solution of a tiny soft-margin SVM dual.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// `sum_s alpha_s y_s K(x_s, x_t) + bias` at each training point.
    pub decision_values: Vec<f64>,
    pub objective: f64,
}

impl DualSolution {
    /// Sum of hinge losses `max(0, 1 - y f)` on the training points.
    pub fn hinge_total(&self, y: &[i8]) -> f64 {
        self.decision_values
            .iter()
            .zip(y)
            .map(|(f, &l)| (1.0 - f64::from(l) * f).max(0.0))
            .sum()
    }
}

#[derive(Clone, Copy, PartialEq)]
enum State {
    Lower,
    Free,
    Upper,
}

/// Solve `A z = rhs` by Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for (offset, row) in lower.iter_mut().enumerate() {
            let factor = row[col] / pivot_row[col];
            for (v, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *v -= factor * p;
            }
            rhs[col + 1 + offset] -= factor * rhs[col];
        }
    }
    let mut z = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * z[k]).sum();
        z[row] = (rhs[row] - tail) / a[row][row];
    }
    Some(z)
}

/// Reference solver for the binary RBF SVM dual on at most six points.
///
/// Every assignment of each multiplier to {0, free, C} is tried; for the free
/// ones the KKT equalities form a linear system in `(alpha_F, bias)`. Among
/// assignments whose solution satisfies all KKT conditions, the one with the
/// lowest dual objective wins. Free multipliers must lie strictly inside
/// `(0, C)`. With no free multiplier the bias is the midpoint of its feasible
/// interval.
pub fn dual_qp_oracle(x: &[Vec<f64>], y: &[i8], c: f64, gamma: f64) -> Result<DualSolution> {
    const SLACK: f64 = 1e-9;
    let n = x.len();
    if n == 0 || n > 6 {
        return Err(Error::Domain(format!(
            "oracle handles 1..=6 points, got {n}"
        )));
    }
    if y.len() != n || y.iter().any(|&v| v != 1 && v != -1) {
        return Err(Error::Domain(
            "labels must be -1 or +1, one per point".into(),
        ));
    }
    if !(y.contains(&1) && y.contains(&-1)) {
        return Err(Error::SingleClass);
    }
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let kernel: Vec<Vec<f64>> = x
        .iter()
        .map(|a| {
            x.iter()
                .map(|b| {
                    let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum();
                    (-gamma * d2).exp()
                })
                .collect()
        })
        .collect();
    let q = |s: usize, t: usize| yf[s] * yf[t] * kernel[s][t];

    let mut best: Option<DualSolution> = None;
    let mut states = vec![State::Lower; n];
    for code in 0..3usize.pow(n as u32) {
        let mut rest = code;
        for s in states.iter_mut() {
            *s = match rest % 3 {
                0 => State::Lower,
                1 => State::Free,
                _ => State::Upper,
            };
            rest /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&t| states[t] == State::Free).collect();
        let mut alpha: Vec<f64> = states
            .iter()
            .map(|s| if *s == State::Upper { c } else { 0.0 })
            .collect();

        let bias = if free.is_empty() {
            let balance: f64 = (0..n).map(|t| yf[t] * alpha[t]).sum();
            if balance.abs() > SLACK * c.max(1.0) {
                continue;
            }
            // y_t f_t >= 1 at 0, <= 1 at C; each bounds the bias on one side
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for t in 0..n {
                let g: f64 = (0..n).map(|s| q(t, s) * alpha[s]).sum::<f64>() - 1.0;
                let at_lower = states[t] == State::Lower;
                if at_lower == (yf[t] > 0.0) {
                    lo = lo.max(-yf[t] * g);
                } else {
                    hi = hi.min(-yf[t] * g);
                }
            }
            if lo > hi + SLACK || !lo.is_finite() || !hi.is_finite() {
                continue;
            }
            (lo + hi) / 2.0
        } else {
            let m = free.len();
            let mut a = vec![vec![0.0; m + 1]; m + 1];
            let mut rhs = vec![0.0; m + 1];
            for (r, &t) in free.iter().enumerate() {
                for (k, &s) in free.iter().enumerate() {
                    a[r][k] = q(t, s);
                }
                a[r][m] = yf[t];
                rhs[r] = 1.0
                    - (0..n)
                        .filter(|&s| states[s] == State::Upper)
                        .map(|s| q(t, s) * c)
                        .sum::<f64>();
            }
            for (k, &s) in free.iter().enumerate() {
                a[m][k] = yf[s];
            }
            rhs[m] = -(0..n)
                .filter(|&s| states[s] == State::Upper)
                .map(|s| yf[s] * c)
                .sum::<f64>();
            let Some(z) = solve_dense(a, rhs) else {
                continue;
            };
            // a multiplier solved onto a bound belongs to the bound assignment,
            // where the bias is the interval midpoint instead
            let interior = SLACK * c.max(1.0);
            if (0..m).any(|k| z[k] <= interior || z[k] >= c - interior) {
                continue;
            }
            for (k, &s) in free.iter().enumerate() {
                alpha[s] = z[k].clamp(0.0, c);
            }
            z[m]
        };

        let decision_values: Vec<f64> = (0..n)
            .map(|t| (0..n).map(|s| alpha[s] * yf[s] * kernel[s][t]).sum::<f64>() + bias)
            .collect();
        let kkt_ok = (0..n).all(|t| {
            let margin = yf[t] * decision_values[t];
            match states[t] {
                State::Lower => margin >= 1.0 - 1e-7,
                State::Upper => margin <= 1.0 + 1e-7,
                State::Free => (margin - 1.0).abs() <= 1e-7,
            }
        });
        if !kkt_ok {
            continue;
        }
        let objective = 0.5
            * (0..n)
                .flat_map(|s| (0..n).map(move |t| (s, t)))
                .map(|(s, t)| alpha[s] * alpha[t] * q(s, t))
                .sum::<f64>()
            - alpha.iter().sum::<f64>();
        if best
            .as_ref()
            .is_none_or(|b| objective < b.objective - 1e-12)
        {
            best = Some(DualSolution {
                alpha,
                bias,
                decision_values,
                objective,
            });
        }
    }
    best.ok_or_else(|| Error::Domain("no KKT point found".into()))
}

/// Random tiny binary problem for solver cross-checks: 2..=6 points in 1 or
/// 2 dimensions with both labels present, plus `(C, gamma)`.
pub fn random_tiny_problem(seed: u64) -> (Vec<Vec<f64>>, Vec<i8>, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=6);
    let dim = rng.random_range(1..=2);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let mut y: Vec<i8> = (0..n)
        .map(|_| if rng.random_bool(0.5) { 1 } else { -1 })
        .collect();
    y[0] = 1;
    y[1] = -1;
    let c = [0.5, 1.0, 5.0, 50.0][rng.random_range(0..4)];
    let gamma = rng.random_range(0.2..2.0);
    (x, y, c, gamma)
}
