//! Monte Carlo harnesses: convergence rate, concentration tail, and the
//! flat-versus-adapted gap.
//!
//! Each trial draws its own sample with seed
//! `derive_seed(derive_seed(seed, N), trial)`, so results do not depend on the
//! number of worker threads or the order in which trials finish. Trials run
//! on the current rayon pool; results are collected by trial index.

mod deviation;
mod plot;
mod rate;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{GridKind, GridSpec};
use crate::measure::{adapted_empirical, empirical, PathMeasureTree};
use crate::models::{figure1_pair, ModelSpec};
use crate::nested::{aw_nested, w_flat};
use crate::paths::{Dims, PathSample};
use crate::rng::derive_seed;

pub use deviation::{deviation_experiment, DeviationConfig, DeviationReport, TailRow, XGrid};
pub use plot::rate_svg;
pub use rate::{rate_experiment, Audit, RateConfig, RateReport, RateRow};

/// Stream index reserved for the proxy reference sample.
pub const PROXY_STREAM: u64 = u64::MAX;

/// How sample trees are built from raw paths.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridChoice {
    Uniform,
    NonUniform,
    /// The classical empirical measure, without projection.
    None,
}

impl GridChoice {
    /// The tree of `sample`, projected on the grid tuned to its size.
    pub fn build(self, sample: &PathSample) -> Result<PathMeasureTree> {
        let kind = match self {
            GridChoice::Uniform => GridKind::Uniform,
            GridChoice::NonUniform => GridKind::NonUniform,
            GridChoice::None => return empirical(sample),
        };
        let spec = GridSpec::new(kind, sample.dims(), sample.len() as u64)?;
        adapted_empirical(sample, &spec)
    }
}

impl FromStr for GridChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(GridChoice::Uniform),
            "nonuniform" | "non-uniform" => Ok(GridChoice::NonUniform),
            "none" => Ok(GridChoice::None),
            _ => Err(Error::InvalidParameter(format!(
                "unknown grid {s:?} (expected uniform, nonuniform or none)"
            ))),
        }
    }
}

impl fmt::Display for GridChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridChoice::Uniform => "uniform",
            GridChoice::NonUniform => "nonuniform",
            GridChoice::None => "none",
        })
    }
}

/// The measure errors are computed against.
#[derive(Clone, Debug, PartialEq)]
pub enum Reference {
    /// The exact law, when it is a finite tree.
    GroundTruth(PathMeasureTree),
    /// Adapted empirical tree of an independent sample of size `m` on the
    /// uniform grid tuned to `m`.
    Proxy { m: usize },
}

impl Reference {
    /// Materialises the reference tree for `model`.
    pub fn resolve(&self, model: &ModelSpec, seed: u64) -> Result<PathMeasureTree> {
        match self {
            Reference::GroundTruth(tree) => {
                if tree.dims() != model.dims() {
                    return Err(Error::DimensionMismatch {
                        expected: model.dims().len(),
                        found: tree.dims().len(),
                    });
                }
                Ok(tree.clone())
            }
            Reference::Proxy { m } => {
                let sample = model.sample(*m, derive_seed(seed, PROXY_STREAM))?;
                GridChoice::Uniform.build(&sample)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Reference::GroundTruth(_) => "truth".into(),
            Reference::Proxy { m } => format!("proxy:{m}"),
        }
    }
}

/// Seed of trial `trial` at sample size `n`.
pub fn trial_seed(seed: u64, n: usize, trial: usize) -> u64 {
    derive_seed(derive_seed(seed, n as u64), trial as u64)
}

/// `D(d)`: `d + 1` for `d <= 2`, else `d`.
pub fn dimension_correction(d: usize) -> usize {
    if d <= 2 {
        d + 1
    } else {
        d
    }
}

/// The moment-estimate exponent `-1 / (D(d) T)`.
pub fn theoretical_slope(dims: Dims) -> f64 {
    -1.0 / (dimension_correction(dims.d()) * dims.t()) as f64
}

/// Least-squares fit `y = a + b x`; returns `(b, a, stderr of b)`. The
/// standard error is NaN with fewer than three points.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if x.len() > 2 {
        let ssr: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, intercept, stderr)
}

/// Ranks starting at 1, ties sharing their average rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (Pearson correlation of average ranks). NaN if
/// either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Flat and adapted distances of the two-leaf example.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapReport {
    pub epsilon: f64,
    pub w: f64,
    pub aw: f64,
    pub gap: f64,
}

impl fmt::Display for GapReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epsilon = {}\nW  = {}\nAW = {}\ngap = {}",
            self.epsilon, self.w, self.aw, self.gap
        )
    }
}

pub fn gap_demo(epsilon: f64) -> Result<GapReport> {
    let (mu, nu) = figure1_pair(epsilon)?;
    let w = w_flat(&mu, &nu, 1.0)?;
    let aw = aw_nested(&mu, &nu, 1.0)?.0;
    Ok(GapReport {
        epsilon,
        w,
        aw,
        gap: aw - w,
    })
}
