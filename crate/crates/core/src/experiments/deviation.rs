use std::io::Write;

use rayon::prelude::*;

use super::rate::{mean_std, run_trial};
use super::{ols, spearman, theoretical_slope, trial_seed, GridChoice, Reference};
use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::nested::DEFAULT_BUDGET;
use crate::paths::fmt_exact;

/// Fewest trials accepted for a tail estimate.
pub const MIN_TRIALS: usize = 200;

/// Points at which the tail is evaluated.
#[derive(Clone, Debug, PartialEq)]
pub enum XGrid {
    Values(Vec<f64>),
    /// `k` equally spaced points from 0 to the largest observed deviation
    /// above the mean.
    Auto(usize),
}

#[derive(Clone, Debug)]
pub struct DeviationConfig {
    pub model: ModelSpec,
    pub grid: GridChoice,
    pub n: usize,
    pub trials: usize,
    pub x_grid: XGrid,
    pub seed: u64,
    pub reference: Reference,
    pub budget: u64,
}

impl DeviationConfig {
    pub fn new(model: ModelSpec, grid: GridChoice, n: usize, trials: usize, seed: u64, reference: Reference) -> Self {
        Self {
            model,
            grid,
            n,
            trials,
            x_grid: XGrid::Auto(25),
            seed,
            reference,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailRow {
    pub x: f64,
    /// Fraction of trials with `error >= mean + x`.
    pub tail: f64,
    /// `ln tail` (`-inf` when the tail is empty).
    pub log_tail: f64,
    /// `N x^2`, the abscissa of the sub-Gaussian bound.
    pub n_x2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviationReport {
    pub model: String,
    pub grid: GridChoice,
    pub reference: String,
    pub n: usize,
    pub trials: usize,
    pub errors: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub rows: Vec<TailRow>,
    /// Spearman correlation of `log_tail` and `x^2` over points with a
    /// nonempty tail.
    pub spearman: f64,
    /// Least-squares slope of `log_tail` on `N x^2` over the same points,
    /// an empirical stand-in for `-c` in `exp(-c N x^2)`.
    pub tail_slope: f64,
    /// The decay exponent of the centring rate, `-1/(D(d) T)`.
    pub rate_exponent: f64,
}

impl DeviationReport {
    pub fn tail_nonincreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].tail <= w[0].tail)
    }

    /// `x,tail,log_tail,n_x2`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,tail,log_tail,n_x2")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_exact(r.x),
                fmt_exact(r.tail),
                fmt_exact(r.log_tail),
                fmt_exact(r.n_x2)
            )?;
        }
        Ok(())
    }

    /// `trial,error`.
    pub fn write_errors_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "trial,error")?;
        for (k, e) in self.errors.iter().enumerate() {
            writeln!(w, "{k},{}", fmt_exact(*e))?;
        }
        Ok(())
    }
}

/// Empirical tail of the deviation of the adapted error above its mean.
pub fn deviation_experiment(cfg: &DeviationConfig) -> Result<DeviationReport> {
    if cfg.n == 0 {
        return Err(Error::InvalidParameter("N must be positive".into()));
    }
    if cfg.trials < MIN_TRIALS {
        return Err(Error::InvalidParameter(format!(
            "{} trials requested; tail estimates need at least {MIN_TRIALS}",
            cfg.trials
        )));
    }
    if let Reference::Proxy { m } = cfg.reference {
        if m < 8 * cfg.n {
            return Err(Error::InvalidParameter(format!(
                "proxy size {m} is below 8 x N = {}",
                8 * cfg.n
            )));
        }
    }
    let reference = cfg.reference.resolve(&cfg.model, cfg.seed)?;
    let errors: Vec<f64> = (0..cfg.trials)
        .into_par_iter()
        .map(|k| {
            run_trial(
                &cfg.model,
                cfg.grid,
                &reference,
                cfg.n,
                trial_seed(cfg.seed, cfg.n, k),
                cfg.budget,
                false,
            )
            .map(|r| r.0)
        })
        .collect::<Result<_>>()?;
    let (mean, std) = mean_std(&errors);
    let xs: Vec<f64> = match &cfg.x_grid {
        XGrid::Values(v) => {
            if v.iter().any(|x| !x.is_finite() || *x < 0.0) || v.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParameter(
                    "x-grid must be finite, nonnegative and strictly increasing".into(),
                ));
            }
            v.clone()
        }
        XGrid::Auto(k) => {
            let k = (*k).max(2);
            let top = errors.iter().fold(0.0_f64, |m, e| m.max(e - mean));
            (0..k).map(|i| top * i as f64 / (k - 1) as f64).collect()
        }
    };
    let n = cfg.n as f64;
    let rows: Vec<TailRow> = xs
        .iter()
        .map(|&x| {
            let hits = errors.iter().filter(|&&e| e >= mean + x).count();
            let tail = hits as f64 / errors.len() as f64;
            TailRow {
                x,
                tail,
                log_tail: tail.ln(),
                n_x2: n * x * x,
            }
        })
        .collect();
    let populated: Vec<&TailRow> = rows.iter().filter(|r| r.tail > 0.0).collect();
    let x2: Vec<f64> = populated.iter().map(|r| r.x * r.x).collect();
    let lt: Vec<f64> = populated.iter().map(|r| r.log_tail).collect();
    let nx2: Vec<f64> = populated.iter().map(|r| r.n_x2).collect();
    let (spearman, tail_slope) = if populated.len() >= 2 {
        (spearman(&x2, &lt), ols(&nx2, &lt).0)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(DeviationReport {
        model: cfg.model.id(),
        grid: cfg.grid,
        reference: cfg.reference.label(),
        n: cfg.n,
        trials: cfg.trials,
        errors,
        mean,
        std,
        rows,
        spearman,
        tail_slope,
        rate_exponent: theoretical_slope(cfg.model.dims()),
    })
}
