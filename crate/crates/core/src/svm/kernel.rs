use crate::error::{Error, Result};

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// `exp(-gamma * |a - b|^2)`.
pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok((-gamma * squared_distance(a, b)).exp())
}

/// Dense row-major kernel matrix. Rows must share one length.
pub fn kernel_matrix(x: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        for j in 0..i {
            let v = (-gamma * squared_distance(&x[i], &x[j])).exp();
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn analytic_values() {
        assert_eq!(rbf_kernel(&[1.0, 2.0], &[1.0, 2.0], 3.0).unwrap(), 1.0);
        let v = rbf_kernel(&[0.0], &[1.0], 1.0).unwrap();
        assert!((v - 0.367879).abs() < 1e-6);
        assert!(rbf_kernel(&[0.0], &[1.0, 2.0], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(
            a in prop::collection::vec(-10.0f64..10.0, 4),
            b in prop::collection::vec(-10.0f64..10.0, 4),
            gamma in 0.01f64..5.0,
        ) {
            let ab = rbf_kernel(&a, &b, gamma).unwrap();
            let ba = rbf_kernel(&b, &a, gamma).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((0.0..=1.0).contains(&ab));
        }
    }
}
