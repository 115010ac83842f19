//! Pairwise landmark displacement features.
//!
//! For a frame with `L` landmarks every unordered pair `i < j` contributes a
//! signed horizontal difference `x_j - x_i` and a signed vertical difference
//! `y_j - y_i`. Horizontal entries occupy flat indices `0..C(L,2)` in
//! lexicographic pair order, vertical entries follow at `C(L,2)..2*C(L,2)`.
//! An example's feature vector is the apex distance vector minus the neutral
//! one.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::landmarks::{Dataset, ExpressionLabel, LandmarkFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    Horizontal,
    Vertical,
}

impl Axis {
    pub fn short(self) -> &'static str {
        match self {
            Axis::Horizontal => "h",
            Axis::Vertical => "v",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::Horizontal => "horizontal",
            Axis::Vertical => "vertical",
        }
    }

    pub fn from_short(s: &str) -> Option<Self> {
        match s {
            "h" => Some(Axis::Horizontal),
            "v" => Some(Axis::Vertical),
            _ => None,
        }
    }
}

/// Number of unordered landmark pairs, `C(L, 2)`.
pub fn pair_count(landmark_count: usize) -> usize {
    landmark_count * landmark_count.saturating_sub(1) / 2
}

/// Full feature dimension, `2 * C(L, 2)`.
pub fn feature_dim(landmark_count: usize) -> usize {
    2 * pair_count(landmark_count)
}

/// Lexicographic rank of the pair `(i, j)` among all pairs `i < j < L`.
pub fn pair_rank(i: usize, j: usize, landmark_count: usize) -> Result<usize> {
    if i >= j || j >= landmark_count {
        return Err(Error::Domain(format!(
            "pair ({i}, {j}) requires i < j < {landmark_count}"
        )));
    }
    // pairs starting with 0..i come first: sum_{a<i} (L - 1 - a)
    Ok(i * (2 * landmark_count - i - 1) / 2 + (j - i - 1))
}

/// Inverse of [`pair_rank`].
pub fn pair_unrank(rank: usize, landmark_count: usize) -> Result<(usize, usize)> {
    if rank >= pair_count(landmark_count) {
        return Err(Error::Domain(format!(
            "pair rank {rank} out of range for {landmark_count} landmarks"
        )));
    }
    let mut remaining = rank;
    let mut i = 0;
    loop {
        let row = landmark_count - 1 - i;
        if remaining < row {
            return Ok((i, i + 1 + remaining));
        }
        remaining -= row;
        i += 1;
    }
}

/// One feature: a landmark pair and the coordinate axis of its difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureIndex {
    pub i: usize,
    pub j: usize,
    pub axis: Axis,
}

impl FeatureIndex {
    pub fn new(i: usize, j: usize, axis: Axis, landmark_count: usize) -> Result<Self> {
        pair_rank(i, j, landmark_count)?;
        Ok(FeatureIndex { i, j, axis })
    }

    pub fn flat(&self, landmark_count: usize) -> Result<usize> {
        let rank = pair_rank(self.i, self.j, landmark_count)?;
        Ok(match self.axis {
            Axis::Horizontal => rank,
            Axis::Vertical => pair_count(landmark_count) + rank,
        })
    }

    pub fn from_flat(flat: usize, landmark_count: usize) -> Result<Self> {
        let pairs = pair_count(landmark_count);
        if flat >= 2 * pairs {
            return Err(Error::Domain(format!(
                "flat index {flat} out of range (dimension {})",
                2 * pairs
            )));
        }
        let (axis, rank) = if flat < pairs {
            (Axis::Horizontal, flat)
        } else {
            (Axis::Vertical, flat - pairs)
        };
        let (i, j) = pair_unrank(rank, landmark_count)?;
        Ok(FeatureIndex { i, j, axis })
    }
}

impl fmt::Display for FeatureIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.i, self.j, self.axis.short())
    }
}

/// Flat indices for an ordered subset, rejecting duplicates and out-of-range entries.
pub fn flat_indices(subset: &[FeatureIndex], landmark_count: usize) -> Result<Vec<usize>> {
    let mut seen = HashSet::with_capacity(subset.len());
    subset
        .iter()
        .map(|idx| {
            let flat = idx.flat(landmark_count)?;
            if !seen.insert(flat) {
                return Err(Error::Domain(format!("duplicate feature {idx}")));
            }
            Ok(flat)
        })
        .collect()
}

/// Signed pairwise differences of one frame, in flat-index order.
pub fn distance_vector(frame: &LandmarkFrame) -> Vec<f64> {
    let points = frame.points();
    let l = points.len();
    let pairs = pair_count(l);
    let mut out = vec![0.0; 2 * pairs];
    let mut rank = 0;
    for i in 0..l {
        for j in i + 1..l {
            out[rank] = points[j].x - points[i].x;
            out[pairs + rank] = points[j].y - points[i].y;
            rank += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Full { landmark_count: usize },
    Projected { indices: Vec<FeatureIndex> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Apex distance vector minus neutral distance vector.
pub fn delta_features(neutral: &LandmarkFrame, apex: &LandmarkFrame) -> Result<FeatureVector> {
    if neutral.len() != apex.len() {
        return Err(Error::LandmarkCountMismatch {
            expected: neutral.len(),
            found: apex.len(),
        });
    }
    let before = distance_vector(neutral);
    let mut values = distance_vector(apex);
    for (v, b) in values.iter_mut().zip(&before) {
        *v -= b;
    }
    Ok(FeatureVector {
        values,
        provenance: Provenance::Full {
            landmark_count: neutral.len(),
        },
    })
}

/// Select `subset` entries of a full vector, in subset order.
pub fn project(vector: &FeatureVector, subset: &[FeatureIndex]) -> Result<FeatureVector> {
    let Provenance::Full { landmark_count } = vector.provenance else {
        return Err(Error::Domain(
            "projection requires a full feature vector".into(),
        ));
    };
    let flats = flat_indices(subset, landmark_count)?;
    Ok(FeatureVector {
        values: flats.iter().map(|&f| vector.values[f]).collect(),
        provenance: Provenance::Projected {
            indices: subset.to_vec(),
        },
    })
}

/// Scale to unit Euclidean norm in place; the zero vector is left as is.
pub fn l2_normalize_in_place(values: &mut [f64]) -> Result<()> {
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        values.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(())
}

pub fn l2_normalize(vector: &FeatureVector) -> Result<FeatureVector> {
    let mut out = vector.clone();
    l2_normalize_in_place(&mut out.values)?;
    Ok(out)
}

/// Full delta-feature vectors for a whole dataset, in manifest order.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub landmark_count: usize,
    pub ids: Vec<String>,
    pub labels: Vec<ExpressionLabel>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn from_dataset(dataset: &Dataset) -> Result<Self> {
        let rows = dataset
            .examples
            .par_iter()
            .map(|ex| delta_features(&ex.neutral, &ex.apex).map(|v| v.values))
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureMatrix {
            landmark_count: dataset.landmark_count,
            ids: dataset.examples.iter().map(|e| e.id.clone()).collect(),
            labels: dataset.labels(),
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        feature_dim(self.landmark_count)
    }

    pub fn label_codes(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.code()).collect()
    }

    /// Projected and L2-normalized rows for the given examples.
    pub fn normalized_rows(&self, flats: &[usize], examples: &[usize]) -> Result<Vec<Vec<f64>>> {
        examples
            .iter()
            .map(|&e| {
                let row = &self.rows[e];
                let mut v: Vec<f64> = flats.iter().map(|&f| row[f]).collect();
                l2_normalize_in_place(&mut v)?;
                Ok(v)
            })
            .collect()
    }

    /// CSV with header `id,label,f0..f{D-1}`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let dim = self.dim();
        let mut header = Vec::with_capacity(dim + 2);
        header.push("id".to_string());
        header.push("label".to_string());
        header.extend((0..dim).map(|f| format!("f{f}")));
        writer.write_record(&header)?;
        for ((id, label), row) in self.ids.iter().zip(&self.labels).zip(&self.rows) {
            let mut record = Vec::with_capacity(dim + 2);
            record.push(id.clone());
            record.push(label.name().to_string());
            record.extend(row.iter().map(|v| v.to_string()));
            writer.write_record(&record)?;
        }
        writer.flush().map_err(|e| Error::io("feature matrix", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(coords: &[(f64, f64)]) -> LandmarkFrame {
        LandmarkFrame::from_xy(coords).unwrap()
    }

    /// All pairs `i < j < l`, enumerated directly.
    fn brute_pairs(l: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..l {
            for j in 0..l {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    #[test]
    fn pair_rank_examples() {
        assert_eq!(pair_rank(0, 1, 68).unwrap(), 0);
        let all = brute_pairs(68);
        assert_eq!(all.len(), 2278);
        assert_eq!(all.iter().position(|&p| p == (66, 67)), Some(2277));
        assert_eq!(pair_rank(66, 67, 68).unwrap(), 2277);
        let four = brute_pairs(4);
        assert_eq!(four.iter().position(|&p| p == (0, 2)), Some(1));
        assert_eq!(pair_rank(0, 2, 4).unwrap(), 1);
    }

    #[test]
    fn pair_rank_matches_enumeration() {
        for l in 2..=20 {
            for (rank, &(i, j)) in brute_pairs(l).iter().enumerate() {
                assert_eq!(pair_rank(i, j, l).unwrap(), rank);
                assert_eq!(pair_unrank(rank, l).unwrap(), (i, j));
            }
        }
    }

    #[test]
    fn pair_rank_domain_errors() {
        assert!(pair_rank(3, 3, 68).is_err());
        assert!(pair_rank(4, 3, 68).is_err());
        assert!(pair_rank(0, 68, 68).is_err());
        assert!(pair_unrank(2278, 68).is_err());
        assert!(FeatureIndex::from_flat(4556, 68).is_err());
    }

    #[test]
    fn flat_encoding_layout() {
        let last = FeatureIndex::from_flat(4555, 68).unwrap();
        assert_eq!(
            last,
            FeatureIndex {
                i: 66,
                j: 67,
                axis: Axis::Vertical
            }
        );
        let first_v = FeatureIndex::from_flat(2278, 68).unwrap();
        assert_eq!(
            first_v,
            FeatureIndex {
                i: 0,
                j: 1,
                axis: Axis::Vertical
            }
        );
    }

    #[test]
    fn three_point_distance_vector() {
        let d = distance_vector(&frame(&[(0.0, 0.0), (1.0, 0.0), (0.0, 2.0)]));
        assert_eq!(d, vec![1.0, 0.0, -1.0, 0.0, 2.0, 2.0]);
    }

    #[test]
    fn identical_points_give_zero() {
        let d = distance_vector(&frame(&[(5.0, -3.0); 10]));
        assert_eq!(d.len(), 90);
        assert!(d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn delta_of_identical_frames_is_zero() {
        let coords: Vec<(f64, f64)> = (0..68).map(|i| (i as f64, (i * i) as f64)).collect();
        let f = frame(&coords);
        let delta = delta_features(&f, &f).unwrap();
        assert_eq!(delta.len(), 4556);
        assert!(delta.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn delta_count_mismatch() {
        let a = frame(&[(0.0, 0.0), (1.0, 0.0)]);
        let b = frame(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]);
        assert!(delta_features(&a, &b).is_err());
    }

    #[test]
    fn mouth_corner_widening() {
        // landmarks 0 and 1 are mouth corners, 10 apart in neutral, 14 apart in apex
        let neutral = frame(&[(10.0, 50.0), (20.0, 50.0), (15.0, 30.0), (15.0, 70.0)]);
        let apex = frame(&[(8.0, 50.0), (22.0, 50.0), (15.0, 30.0), (15.0, 70.0)]);
        let delta = delta_features(&neutral, &apex).unwrap().values;

        // brute force: recompute each entry from coordinates
        let (n, a) = (neutral.points(), apex.points());
        for (rank, (i, j)) in brute_pairs(4).into_iter().enumerate() {
            let dx = (a[j].x - a[i].x) - (n[j].x - n[i].x);
            let dy = (a[j].y - a[i].y) - (n[j].y - n[i].y);
            assert_eq!(delta[rank], dx);
            assert_eq!(delta[6 + rank], dy);
        }
        assert_eq!(delta[0], 4.0);
        // corner 0 moved left: pairs (0,2),(0,3) grow, corner 1 moved right: (1,2),(1,3) shrink
        assert_eq!(&delta[1..5], &[2.0, 2.0, -2.0, -2.0]);
        assert!(delta[6..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn projection() {
        let coords: Vec<(f64, f64)> = (0..68).map(|i| (i as f64 * 0.5, 3.0 * i as f64)).collect();
        let apex: Vec<(f64, f64)> = coords.iter().map(|&(x, y)| (x * 1.1, y - x)).collect();
        let full = delta_features(&frame(&coords), &frame(&apex)).unwrap();

        let all: Vec<FeatureIndex> = (0..4556)
            .map(|f| FeatureIndex::from_flat(f, 68).unwrap())
            .collect();
        assert_eq!(project(&full, &all).unwrap().values, full.values);
        assert!(project(&full, &[]).unwrap().is_empty());

        let pick = [
            FeatureIndex::from_flat(4555, 68).unwrap(),
            FeatureIndex::from_flat(0, 68).unwrap(),
        ];
        let p = project(&full, &pick).unwrap();
        assert_eq!(p.values, vec![full.values[4555], full.values[0]]);

        let dup = [pick[0], pick[0]];
        assert!(project(&full, &dup).is_err());
        let out_of_range = [FeatureIndex {
            i: 0,
            j: 68,
            axis: Axis::Horizontal,
        }];
        assert!(project(&full, &out_of_range).is_err());
        assert!(project(&p, &pick).is_err());
    }

    #[test]
    fn normalization() {
        let v = |values: Vec<f64>| FeatureVector {
            values,
            provenance: Provenance::Full { landmark_count: 2 },
        };
        assert_eq!(
            l2_normalize(&v(vec![3.0, 4.0])).unwrap().values,
            vec![0.6, 0.8]
        );
        assert_eq!(
            l2_normalize(&v(vec![0.0, 0.0])).unwrap().values,
            vec![0.0, 0.0]
        );
        assert!(l2_normalize(&v(vec![f64::NAN, 1.0])).is_err());
    }

    #[test]
    fn feature_csv_shape() {
        let ex = crate::landmarks::SequenceExample::new(
            "e1",
            "s1",
            ExpressionLabel::Fear,
            frame(&[(0.0, 0.0), (1.0, 0.0), (0.0, 2.0)]),
            frame(&[(0.0, 0.0), (2.0, 0.0), (0.0, 2.5)]),
        )
        .unwrap();
        let ds = Dataset::new(3, vec![ex]).unwrap();
        let m = FeatureMatrix::from_dataset(&ds).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "id,label,f0,f1,f2,f3,f4,f5");
        assert_eq!(lines[1], "e1,fear,1,0,-1,0,0.5,0.5");
    }
}
