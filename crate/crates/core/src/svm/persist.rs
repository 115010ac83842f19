//! Plain-text model files.
//!
//! ```text
//! landmark-sfs svm v1
//! class_count 7
//! classes 0 1 2 3 4 5 6
//! dim 7
//! gamma 0.142857
//! config c=1 gamma=scale tolerance=0.001 max_passes=1000 calibrate=true
//! pairs 21
//! pair 0 1
//! bias -0.03
//! sigmoid -2.1 0.04          (or `sigmoid none`)
//! iterations 57
//! support 12
//! 4 0.5 0.1 ...              (training index, coefficient, vector)
//! ...
//! end
//! ```
//!
//! Reals are written in shortest round-trip form, so a reloaded model
//! predicts bit-identically.

use std::fmt::Write as _;
use std::path::Path;

use super::calibration::Sigmoid;
use super::multiclass::{PairModel, SvmModel};
use super::smo::BinarySvmModel;
use super::{Gamma, SvmConfig};
use crate::error::{Error, Result};

const MAGIC: &str = "landmark-sfs svm v1";

fn join<T: ToString>(values: impl IntoIterator<Item = T>) -> String {
    values
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn write_model(model: &SvmModel) -> String {
    let mut out = String::new();
    let cfg = &model.config;
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "class_count {}", model.class_count);
    let _ = writeln!(out, "classes {}", join(&model.classes));
    let _ = writeln!(out, "dim {}", model.dim);
    let _ = writeln!(out, "gamma {}", model.gamma);
    let _ = writeln!(
        out,
        "config c={} gamma={} tolerance={} max_passes={} calibrate={}",
        cfg.c, cfg.gamma, cfg.tolerance, cfg.max_passes, cfg.calibrate
    );
    let _ = writeln!(out, "pairs {}", model.pairs.len());
    for p in &model.pairs {
        let m = &p.model;
        let _ = writeln!(out, "pair {} {}", p.positive, p.negative);
        let _ = writeln!(out, "bias {}", m.bias);
        match p.calibration {
            Some(s) => {
                let _ = writeln!(out, "sigmoid {} {}", s.a, s.b);
            }
            None => out.push_str("sigmoid none\n"),
        }
        let _ = writeln!(out, "iterations {}", m.iterations);
        let _ = writeln!(out, "support {}", m.support_vectors.len());
        for ((idx, coef), sv) in m
            .support_indices
            .iter()
            .zip(&m.dual_coefs)
            .zip(&m.support_vectors)
        {
            let _ = writeln!(out, "{idx} {coef} {}", join(sv));
        }
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
            .ok_or_else(|| Error::Model("unexpected end of file".into()))
    }

    /// Next line, which must start with `key `; returns the remainder.
    fn keyed(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, line) = self.next()?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .map(|r| (n, r))
            .ok_or_else(|| Error::Model(format!("line {n}: expected `{key}`")))
    }
}

fn num<T: std::str::FromStr>(n: usize, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Model(format!("line {n}: malformed value {s:?}")))
}

fn parse_config(n: usize, text: &str) -> Result<SvmConfig> {
    let mut cfg = SvmConfig::default();
    for field in text.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::Model(format!("line {n}: malformed config field {field:?}")))?;
        match key {
            "c" => cfg.c = num(n, value)?,
            "gamma" => cfg.gamma = value.parse::<Gamma>()?,
            "tolerance" => cfg.tolerance = num(n, value)?,
            "max_passes" => cfg.max_passes = num(n, value)?,
            "calibrate" => cfg.calibrate = num(n, value)?,
            _ => {
                return Err(Error::Model(format!(
                    "line {n}: unknown config key {key:?}"
                )))
            }
        }
    }
    Ok(cfg)
}

pub fn read_model(text: &str) -> Result<SvmModel> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (_, magic) = lines.next()?;
    if magic != MAGIC {
        return Err(Error::Model(format!("expected header {MAGIC:?}")));
    }
    let (n, v) = lines.keyed("class_count")?;
    let class_count: usize = num(n, v)?;
    let (n, v) = lines.keyed("classes")?;
    let classes = v
        .split_whitespace()
        .map(|s| num::<usize>(n, s))
        .collect::<Result<Vec<_>>>()?;
    let (n, v) = lines.keyed("dim")?;
    let dim: usize = num(n, v)?;
    let (n, v) = lines.keyed("gamma")?;
    let gamma: f64 = num(n, v)?;
    let (n, v) = lines.keyed("config")?;
    let config = parse_config(n, v)?;
    let (n, v) = lines.keyed("pairs")?;
    let pair_count: usize = num(n, v)?;

    let mut pairs = Vec::with_capacity(pair_count);
    for _ in 0..pair_count {
        let (n, v) = lines.keyed("pair")?;
        let (a, b) = v
            .split_once(' ')
            .ok_or_else(|| Error::Model(format!("line {n}: expected two class codes")))?;
        let (positive, negative): (usize, usize) = (num(n, a)?, num(n, b)?);
        if positive >= class_count || negative >= class_count {
            return Err(Error::Model(format!("line {n}: class code out of range")));
        }
        let (n, v) = lines.keyed("bias")?;
        let bias: f64 = num(n, v)?;
        let (n, v) = lines.keyed("sigmoid")?;
        let calibration = if v.trim() == "none" {
            None
        } else {
            let (a, b) = v
                .split_once(' ')
                .ok_or_else(|| Error::Model(format!("line {n}: expected sigmoid parameters")))?;
            Some(Sigmoid {
                a: num(n, a)?,
                b: num(n, b)?,
            })
        };
        let (n, v) = lines.keyed("iterations")?;
        let iterations: usize = num(n, v)?;
        let (n, v) = lines.keyed("support")?;
        let count: usize = num(n, v)?;

        let mut support_indices = Vec::with_capacity(count);
        let mut dual_coefs = Vec::with_capacity(count);
        let mut support_vectors = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, line) = lines.next()?;
            let mut fields = line.split_whitespace();
            let idx = fields
                .next()
                .ok_or_else(|| Error::Model(format!("line {n}: empty support vector line")))?;
            let coef = fields
                .next()
                .ok_or_else(|| Error::Model(format!("line {n}: missing coefficient")))?;
            support_indices.push(num(n, idx)?);
            dual_coefs.push(num(n, coef)?);
            let sv = fields
                .map(|s| num::<f64>(n, s))
                .collect::<Result<Vec<_>>>()?;
            if sv.len() != dim {
                return Err(Error::Model(format!(
                    "line {n}: support vector has {} entries, expected {dim}",
                    sv.len()
                )));
            }
            support_vectors.push(sv);
        }
        pairs.push(PairModel {
            positive,
            negative,
            model: BinarySvmModel {
                support_vectors,
                dual_coefs,
                bias,
                gamma,
                c: config.c,
                support_indices,
                dim,
                iterations,
            },
            calibration,
        });
    }
    let (n, end) = lines.next()?;
    if end != "end" {
        return Err(Error::Model(format!("line {n}: expected `end`")));
    }
    Ok(SvmModel {
        class_count,
        classes,
        pairs,
        gamma,
        dim,
        config,
    })
}

pub fn save_model(model: &SvmModel, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, write_model(model).as_bytes())
}

pub fn load_model(path: &Path) -> Result<SvmModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_model(&text)
}
