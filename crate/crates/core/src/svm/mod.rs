//! Kernel SVM built from scratch: an SMO dual solver for the binary
//! soft-margin problem, a one-against-one multiclass wrapper, and Platt
//! calibration with pairwise coupling for posterior estimates.

mod calibration;
mod kernel;
mod multiclass;
mod persist;
mod smo;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub use calibration::{couple_pairwise, fit_sigmoid, Sigmoid};
pub use kernel::{kernel_matrix, rbf_kernel, squared_distance};
pub use multiclass::{train_multiclass, vote, PairModel, SvmModel};
pub use persist::{load_model, read_model, save_model, write_model};
pub use smo::{kkt_gap, train_binary, BinarySvmModel};

/// RBF width. `Scale(m)` resolves to `m / (D * var)` on the training data,
/// where `var` is the mean per-coordinate variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    Scale(f64),
    Fixed(f64),
}

impl Gamma {
    pub fn resolve(self, x: &[Vec<f64>]) -> Result<f64> {
        let gamma = match self {
            Gamma::Fixed(g) => g,
            Gamma::Scale(multiplier) => multiplier * scale_gamma(x),
        };
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::Config(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        Ok(gamma)
    }
}

/// `1 / (D * mean per-coordinate variance)`, or 1 for constant data.
fn scale_gamma(x: &[Vec<f64>]) -> f64 {
    let Some(dim) = x.first().map(Vec::len) else {
        return 1.0;
    };
    if dim == 0 {
        return 1.0;
    }
    let n = x.len() as f64;
    let mut total_var = 0.0;
    for d in 0..dim {
        let mean = x.iter().map(|r| r[d]).sum::<f64>() / n;
        total_var += x.iter().map(|r| (r[d] - mean).powi(2)).sum::<f64>() / n;
    }
    let var = total_var / dim as f64;
    if var > 0.0 {
        1.0 / (dim as f64 * var)
    } else {
        1.0
    }
}

impl Default for Gamma {
    fn default() -> Self {
        Gamma::Scale(1.0)
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Gamma::Scale(1.0) => f.write_str("scale"),
            Gamma::Scale(m) => write!(f, "scale*{m}"),
            Gamma::Fixed(g) => write!(f, "{g}"),
        }
    }
}

impl FromStr for Gamma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || {
            Error::Config(format!(
                "invalid gamma {s:?}; expected `scale`, `scale*<m>` or a number"
            ))
        };
        let gamma = if s == "scale" {
            Gamma::Scale(1.0)
        } else if let Some(m) = s.strip_prefix("scale*") {
            Gamma::Scale(m.trim().parse().map_err(|_| bad())?)
        } else {
            Gamma::Fixed(s.parse().map_err(|_| bad())?)
        };
        let value = match gamma {
            Gamma::Scale(v) | Gamma::Fixed(v) => v,
        };
        if !(value.is_finite() && value > 0.0) {
            return Err(bad());
        }
        Ok(gamma)
    }
}

impl Serialize for Gamma {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Gamma {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    /// Box constraint.
    pub c: f64,
    pub gamma: Gamma,
    /// Stopping threshold on the maximal KKT violation.
    pub tolerance: f64,
    /// Iteration safeguard, in multiples of the training-set size.
    pub max_passes: usize,
    pub calibrate: bool,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            gamma: Gamma::default(),
            tolerance: 1e-3,
            max_passes: 1000,
            calibrate: false,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::Config(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::Config(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_passes == 0 {
            return Err(Error::Config("max_passes must be at least 1".into()));
        }
        let (Gamma::Scale(v) | Gamma::Fixed(v)) = self.gamma;
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Config(format!("gamma must be positive, got {v}")));
        }
        Ok(())
    }
}
