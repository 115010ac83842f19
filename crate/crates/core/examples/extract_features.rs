//! Signed displacement features for one neutral/apex pair.
//!
//! Builds a 68-point face, widens the mouth and raises the brows, then lists
//! the strongest entries of the 4556-long feature vector.

use landmark_sfs::features::{delta_features, feature_dim, FeatureIndex};
use landmark_sfs::landmarks::{parse_pts_file, LandmarkFrame, Point};

fn face() -> Vec<Point> {
    (0..68)
        .map(|k| {
            let a = k as f64 * std::f64::consts::TAU / 68.0;
            Point::new(200.0 + 80.0 * a.cos(), 220.0 + 100.0 * a.sin())
        })
        .collect()
}

fn main() -> landmark_sfs::Result<()> {
    let neutral = LandmarkFrame::new(face())?;
    let mut apex_points = face();
    apex_points[48].x -= 6.0; // left mouth corner
    apex_points[54].x += 6.0; // right mouth corner
    for brow in &mut apex_points[17..27] {
        brow.y -= 3.0;
    }
    let apex = LandmarkFrame::new(apex_points)?;

    // frames round-trip through the .pts text format
    let reparsed = parse_pts_file(apex.to_pts_string().as_bytes())?;
    assert_eq!(reparsed, apex);

    let features = delta_features(&neutral, &apex)?;
    println!(
        "feature dimension: {} (expected {})",
        features.len(),
        feature_dim(68)
    );

    let mut ranked: Vec<(usize, f64)> = features.values.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
    println!("strongest displacements:");
    for (flat, value) in ranked.into_iter().take(8) {
        let f = FeatureIndex::from_flat(flat, 68)?;
        println!("  {:>5}  {:<12} {:+.1}", flat, f.to_string(), value);
    }
    Ok(())
}
