use std::io::Write;

use rayon::prelude::*;

use super::{ols, theoretical_slope, trial_seed, GridChoice, Reference};
use crate::error::{Error, Result};
use crate::measure::PathMeasureTree;
use crate::models::ModelSpec;
use crate::nested::{aw_nested_with, w_flat, NestedOptions, DEFAULT_BUDGET};
use crate::paths::fmt_exact;

/// Every `AUDIT_EVERY`-th trial also computes the flat distance.
pub const AUDIT_EVERY: usize = 20;

#[derive(Clone, Debug)]
pub struct RateConfig {
    pub model: ModelSpec,
    pub grid: GridChoice,
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub reference: Reference,
    pub budget: u64,
}

impl RateConfig {
    pub fn new(model: ModelSpec, grid: GridChoice, n_list: Vec<usize>, trials: usize, seed: u64, reference: Reference) -> Self {
        Self {
            model,
            grid,
            n_list,
            trials,
            seed,
            reference,
            budget: DEFAULT_BUDGET,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() || self.n_list[0] == 0 {
            return Err(Error::InvalidParameter("N-list must be nonempty and positive".into()));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("N-list must be strictly increasing".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("at least one trial is required".into()));
        }
        if let Reference::Proxy { m } = self.reference {
            let top = *self.n_list.last().expect("nonempty");
            if m < 8 * top {
                return Err(Error::InvalidParameter(format!(
                    "proxy size {m} is below 8 x max N = {}",
                    8 * top
                )));
            }
        }
        Ok(())
    }
}

/// Flat versus adapted distance recomputed on one trial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Audit {
    pub n: usize,
    pub trial: usize,
    pub aw: f64,
    /// `None` when the leaf-pair count exceeds the budget.
    pub w: Option<f64>,
}

impl Audit {
    pub fn passed(&self) -> bool {
        self.aw >= 0.0 && self.w.is_none_or(|w| w <= self.aw + 1e-9)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateRow {
    pub n: usize,
    pub trials: usize,
    pub mean: f64,
    /// Sample standard deviation over trials (0 for a single trial).
    pub std: f64,
    pub errors: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub model: String,
    pub grid: GridChoice,
    pub reference: String,
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `ln mean` on `ln N`.
    pub slope: f64,
    pub slope_stderr: f64,
    pub theoretical_slope: f64,
    pub audits: Vec<Audit>,
}

impl RateReport {
    pub fn means(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean).collect()
    }

    pub fn audits_passed(&self) -> bool {
        self.audits.iter().all(Audit::passed)
    }

    /// `n,trials,mean,std,slope,slope_stderr,theoretical_slope`, one row per N.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,trials,mean,std,slope,slope_stderr,theoretical_slope")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.n,
                r.trials,
                fmt_exact(r.mean),
                fmt_exact(r.std),
                fmt_exact(self.slope),
                fmt_exact(self.slope_stderr),
                fmt_exact(self.theoretical_slope)
            )?;
        }
        Ok(())
    }

    /// `n,trial,error`, one row per trial.
    pub fn write_errors_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,trial,error")?;
        for r in &self.rows {
            for (k, e) in r.errors.iter().enumerate() {
                writeln!(w, "{},{},{}", r.n, k, fmt_exact(*e))?;
            }
        }
        Ok(())
    }
}

pub(crate) fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 {
        (v.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Adapted distance between the reference and the tree of one fresh sample,
/// plus the audit when requested.
pub(crate) fn run_trial(
    model: &ModelSpec,
    grid: GridChoice,
    reference: &PathMeasureTree,
    n: usize,
    seed: u64,
    budget: u64,
    audit: bool,
) -> Result<(f64, Option<Option<f64>>)> {
    let sample = model.sample(n, seed)?;
    let tree = grid.build(&sample)?;
    let (aw, _) = aw_nested_with(reference, &tree, 1.0, NestedOptions { budget })?;
    let audit = if audit {
        let pairs = reference.leaf_count() as u64 * tree.leaf_count() as u64;
        Some((pairs <= budget).then(|| w_flat(reference, &tree, 1.0)).transpose()?)
    } else {
        None
    };
    Ok((aw, audit))
}

/// Mean adapted distance between the reference and the sample trees over the
/// N-list, with a log-log fit of the decay.
pub fn rate_experiment(cfg: &RateConfig) -> Result<RateReport> {
    cfg.validate()?;
    let reference = cfg.reference.resolve(&cfg.model, cfg.seed)?;
    let mut rows = Vec::with_capacity(cfg.n_list.len());
    let mut audits = Vec::new();
    for &n in &cfg.n_list {
        let results: Vec<(f64, Option<Option<f64>>)> = (0..cfg.trials)
            .into_par_iter()
            .map(|k| {
                run_trial(
                    &cfg.model,
                    cfg.grid,
                    &reference,
                    n,
                    trial_seed(cfg.seed, n, k),
                    cfg.budget,
                    k % AUDIT_EVERY == 0,
                )
            })
            .collect::<Result<_>>()?;
        let errors: Vec<f64> = results.iter().map(|r| r.0).collect();
        for (k, (aw, w)) in results.iter().enumerate() {
            if let Some(w) = w {
                audits.push(Audit {
                    n,
                    trial: k,
                    aw: *aw,
                    w: *w,
                });
            }
        }
        let (mean, std) = mean_std(&errors);
        rows.push(RateRow {
            n,
            trials: cfg.trials,
            mean,
            std,
            errors,
        });
    }
    let (slope, slope_stderr) = if rows.len() >= 2 {
        let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.mean.ln()).collect();
        let (b, _, se) = ols(&x, &y);
        (b, se)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(RateReport {
        model: cfg.model.id(),
        grid: cfg.grid,
        reference: cfg.reference.label(),
        rows,
        slope,
        slope_stderr,
        theoretical_slope: theoretical_slope(cfg.model.dims()),
        audits,
    })
}
