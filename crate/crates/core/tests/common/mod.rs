#![allow(dead_code)]

use landmark_sfs::features::{feature_dim, FeatureMatrix};
use landmark_sfs::landmarks::{ExpressionLabel, LandmarkFrame, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `per` points around each of `k` well-separated centres.
pub fn blobs(k: usize, per: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = rng(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for c in 0..k {
        let centre: Vec<f64> = (0..dim)
            .map(|d| {
                if d == c % dim {
                    10.0 * (1 + c / dim) as f64
                } else {
                    0.0
                }
            })
            .collect();
        for _ in 0..per {
            x.push(
                centre
                    .iter()
                    .map(|m| m + rng.random_range(-1.0..1.0))
                    .collect(),
            );
            y.push(c);
        }
    }
    (x, y)
}

pub fn random_frame(rng: &mut ChaCha8Rng, landmarks: usize, integer: bool) -> LandmarkFrame {
    let coord = |rng: &mut ChaCha8Rng| {
        if integer {
            f64::from(rng.random_range(-500i32..500))
        } else {
            rng.random_range(-500.0..500.0)
        }
    };
    LandmarkFrame::new(
        (0..landmarks)
            .map(|_| {
                let x = coord(rng);
                Point::new(x, coord(rng))
            })
            .collect(),
    )
    .unwrap()
}

/// Feature matrix with explicit rows; columns beyond those given are zero.
pub fn matrix_from_columns(
    landmarks: usize,
    labels: &[usize],
    columns: &[Vec<f64>],
) -> FeatureMatrix {
    let dim = feature_dim(landmarks);
    let rows = (0..labels.len())
        .map(|e| {
            let mut row = vec![0.0; dim];
            for (f, col) in columns.iter().enumerate() {
                row[f] = col[e];
            }
            row
        })
        .collect();
    FeatureMatrix {
        landmark_count: landmarks,
        ids: (0..labels.len()).map(|e| format!("e{e}")).collect(),
        labels: labels.iter().map(|&c| ExpressionLabel::ALL[c]).collect(),
        rows,
    }
}
