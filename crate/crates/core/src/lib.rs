//! Facial expression recognition from landmark-pair displacements.
//!
//! The pipeline: parse neutral/apex landmark frames ([`landmarks`]), turn each
//! pair into signed horizontal/vertical displacement features ([`features`]),
//! pick a small subset by greedy forward selection wrapped around an RBF SVM
//! ([`selection`], [`svm`]), and score the subset with stratified k-fold
//! cross-validation ([`evaluation`]). [`synth`] generates planted-feature
//! datasets and brute-force oracles for testing without real data, and
//! [`cli`] with [`config`] backs the `landmark-sfs` binary.

pub mod cli;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod io;
pub mod landmarks;
pub mod selection;
pub mod svm;
pub mod synth;

pub use error::{Error, Result};
