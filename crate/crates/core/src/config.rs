//! Flat key-value run configuration, stored as TOML.
//!
//! Values resolve in the order defaults, then `--config` file, then command
//! line flags. Every command writes the resolved result as `config.toml`
//! beside its outputs, and that file alone reproduces the run.
//!
//! ```toml
//! seed = 0
//! threads = 0            # 0 = all available cores
//! train_ratio = 0.6
//! folds = 10
//! c = 1.0
//! gamma = "scale"        # "scale", "scale*<m>" or a number
//! tolerance = 0.001
//! max_passes = 1000
//! calibrate = false
//! max_features = 0       # 0 = no cap
//! min_improvement = 0.0
//! grid_search = false
//! manifest = "data/manifest.csv"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::EvalConfig;
use crate::selection::SelectionConfig;
use crate::svm::{Gamma, SvmConfig};
use crate::synth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: usize,
    pub train_ratio: f64,
    pub folds: usize,
    pub c: f64,
    pub gamma: Gamma,
    pub tolerance: f64,
    pub max_passes: usize,
    pub calibrate: bool,
    pub max_features: usize,
    pub min_improvement: f64,
    pub grid_search: bool,

    pub synth_landmarks: usize,
    pub synth_classes: usize,
    pub synth_per_class: usize,
    pub synth_planted: usize,
    pub synth_amplitude: f64,
    pub synth_noise: f64,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subset: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let svm = SvmConfig::default();
        let selection = SelectionConfig::default();
        RunConfig {
            seed: 0,
            threads: 0,
            train_ratio: selection.train_ratio,
            folds: EvalConfig::default().folds,
            c: svm.c,
            gamma: svm.gamma,
            tolerance: svm.tolerance,
            max_passes: svm.max_passes,
            calibrate: svm.calibrate,
            max_features: 0,
            min_improvement: selection.min_improvement,
            grid_search: false,
            synth_landmarks: synth::RECOVERY_LANDMARKS,
            synth_classes: 7,
            synth_per_class: synth::RECOVERY_PER_CLASS,
            synth_planted: 7,
            synth_amplitude: synth::RECOVERY_AMPLITUDE,
            synth_noise: synth::RECOVERY_NOISE,
            manifest: None,
            subset: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_toml().as_bytes())
    }

    pub fn svm(&self) -> SvmConfig {
        SvmConfig {
            c: self.c,
            gamma: self.gamma,
            tolerance: self.tolerance,
            max_passes: self.max_passes,
            calibrate: self.calibrate,
        }
    }

    pub fn selection(&self) -> SelectionConfig {
        SelectionConfig {
            train_ratio: self.train_ratio,
            seed: self.seed,
            svm: self.svm(),
            max_features: (self.max_features > 0).then_some(self.max_features),
            min_improvement: self.min_improvement,
            candidate_pool: None,
        }
    }

    pub fn evaluation(&self) -> EvalConfig {
        EvalConfig {
            folds: self.folds,
            seed: self.seed,
            svm: self.svm(),
        }
    }

    pub fn synth_spec(&self) -> Result<synth::SynthSpec> {
        synth::SynthSpec::with_planted_code(
            self.synth_landmarks,
            self.synth_classes,
            self.synth_per_class,
            self.synth_planted,
            self.synth_amplitude,
            self.synth_noise,
            self.seed,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.svm().validate()?;
        self.selection().validate()?;
        if self.folds < 2 {
            return Err(Error::Config(format!(
                "folds must be at least 2, got {}",
                self.folds
            )));
        }
        Ok(())
    }
}
