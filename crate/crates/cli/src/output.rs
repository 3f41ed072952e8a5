//! JSON envelope, complex-number encoding and plain-text tables.

use serde::ser::SerializeTuple;
use serde::{Serialize, Serializer};
use tl_bethe_core::{ModelParams, C64};

use crate::config::RunConfig;

pub const SCHEMA: &str = "tl-bethe/1";

/// A complex number serialized as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cx(pub C64);

impl Serialize for Cx {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(2)?;
        t.serialize_element(&self.0.re)?;
        t.serialize_element(&self.0.im)?;
        t.end()
    }
}

pub fn cx_vec(v: &[C64]) -> Vec<Cx> {
    v.iter().copied().map(Cx).collect()
}

/// Residuals can be infinite or NaN when a check errors out; JSON has no
/// such numbers, so they are written as `null`.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "Q")]
    pub big_q: Cx,
    pub q: Cx,
    pub branch: &'static str,
    #[serde(rename = "M")]
    pub m: usize,
    pub seeds: usize,
    pub samples: usize,
    pub rng_seed: u64,
    pub tol_identity: f64,
    pub tol_derivative: f64,
}

impl ConfigEcho {
    pub fn new(cfg: &RunConfig, params: &ModelParams) -> Self {
        Self {
            n: cfg.n,
            big_q: Cx(params.big_q()),
            q: Cx(params.q()),
            branch: match params.branch() {
                tl_bethe_core::Branch::Plus => "plus",
                tl_bethe_core::Branch::Minus => "minus",
            },
            m: cfg.m,
            seeds: cfg.seeds,
            samples: cfg.samples,
            rng_seed: cfg.rng_seed,
            tol_identity: params.tol_identity(),
            tol_derivative: params.tol_derivative(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Envelope<T: Serialize> {
    pub schema: &'static str,
    pub command: &'static str,
    pub config: ConfigEcho,
    #[serde(flatten)]
    pub body: T,
}

/// Left-aligned text table.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<String>| {
        let padded: Vec<String> =
            cells.iter().zip(&width).map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count()))).collect();
        padded.join("  ").trim_end().to_string()
    };
    let mut out = line(header.iter().map(|s| s.to_string()).collect());
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.clone()));
        out.push('\n');
    }
    out
}

pub fn fmt_c(z: C64) -> String {
    format!("{:+.6e}{:+.6e}i", z.re, z.im)
}

pub fn fmt_e(x: f64) -> String {
    format!("{x:.3e}")
}
