//! Train a calibrated one-against-one RBF SVM, inspect posteriors and
//! round-trip the model through its text format.

use landmark_sfs::svm::{read_model, train_multiclass, write_model, Gamma, SvmConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> landmark_sfs::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let centers = [(0.0, 0.0), (3.0, 0.0), (0.0, 3.0), (3.0, 3.0)];
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (class, &(cx, cy)) in centers.iter().enumerate() {
        for _ in 0..25 {
            x.push(vec![
                cx + rng.random_range(-1.0..1.0),
                cy + rng.random_range(-1.0..1.0),
            ]);
            y.push(class);
        }
    }

    let config = SvmConfig {
        c: 10.0,
        gamma: Gamma::Scale(1.0),
        calibrate: true,
        ..Default::default()
    };
    let model = train_multiclass(&x, &y, centers.len(), &config)?;
    println!(
        "{} pairwise models, gamma {:.4}",
        model.pairs.len(),
        model.gamma
    );

    let correct = x
        .iter()
        .zip(&y)
        .filter(|(xi, &yi)| model.predict(xi).ok() == Some(yi))
        .count();
    println!("training accuracy {}/{}", correct, x.len());

    for probe in [[0.1, 0.2], [1.5, 1.5], [2.9, 3.2]] {
        let p = model.predict_proba(&probe)?;
        let shown: Vec<String> = p.iter().map(|v| format!("{v:.3}")).collect();
        println!(
            "{probe:?} -> class {} posteriors [{}]",
            model.predict(&probe)?,
            shown.join(", ")
        );
    }

    let text = write_model(&model);
    let reloaded = read_model(&text)?;
    assert_eq!(
        reloaded.decisions(&[1.0, 2.0])?,
        model.decisions(&[1.0, 2.0])?
    );
    println!(
        "model file: {} lines, reload predicts identically",
        text.lines().count()
    );
    Ok(())
}
