//! Path primitives shared by every other module.
//!
//! A path is `T` points in `R^d`, stored flat in time-major order: coordinate
//! `c` of time `t` (both zero-based) lives at `t * d + c`. `R^{dT}` carries the
//! sum-norm `sum_t |x_t|_2`; the per-time norm is Euclidean everywhere in the
//! crate, including transport costs.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// State dimension `d` and number of time steps `T`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims {
    d: usize,
    t: usize,
}

impl Dims {
    pub fn new(d: usize, t: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDims("state dimension d must be >= 1".into()));
        }
        if t < 2 {
            return Err(Error::InvalidDims(format!("need T >= 2 time steps, got {t}")));
        }
        Ok(Self { d, t })
    }

    /// State dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of time steps.
    pub fn t(&self) -> usize {
        self.t
    }

    /// Number of scalar coordinates of a path, `d * T`.
    pub fn len(&self) -> usize {
        self.d * self.t
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A single path with finite coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    dims: Dims,
    values: Vec<f64>,
}

impl Path {
    pub fn new(dims: Dims, values: Vec<f64>) -> Result<Self> {
        if values.len() != dims.len() {
            return Err(Error::DimensionMismatch {
                expected: dims.len(),
                found: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(Self { dims, values })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Point at time `t`, zero-based.
    pub fn point(&self, t: usize) -> &[f64] {
        let d = self.dims.d;
        &self.values[t * d..(t + 1) * d]
    }

    /// The first `t` points, flattened.
    pub fn prefix(&self, t: usize) -> &[f64] {
        &self.values[..t * self.dims.d]
    }

    pub fn sum_norm(&self) -> f64 {
        sum_norm_unchecked(&self.values, self.dims.d)
    }

    pub fn sup_coord(&self) -> f64 {
        sup_coord_unchecked(&self.values)
    }
}

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Euclidean norm on `R^d`.
#[inline]
pub fn euclidean(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Euclidean distance on `R^d`.
#[inline]
pub fn euclidean_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Sum over time of the Euclidean norms of the `d`-blocks of `x`.
///
/// `x` may be a full path or any prefix; its length must be a multiple of `d`.
pub fn sum_norm(x: &[f64], d: usize) -> Result<f64> {
    if d == 0 || !x.len().is_multiple_of(d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x.len(),
        });
    }
    check_finite(x)?;
    Ok(sum_norm_unchecked(x, d))
}

#[inline]
pub(crate) fn sum_norm_unchecked(x: &[f64], d: usize) -> f64 {
    x.chunks_exact(d).map(euclidean).sum()
}

/// Path cost `sum_t |x_t - y_t|^p` between two flat paths or prefixes.
#[inline]
pub(crate) fn path_cost(x: &[f64], y: &[f64], d: usize, p: f64) -> f64 {
    x.chunks_exact(d)
        .zip(y.chunks_exact(d))
        .map(|(a, b)| pow_p(euclidean_dist(a, b), p))
        .sum()
}

#[inline]
pub(crate) fn pow_p(v: f64, p: f64) -> f64 {
    if p == 1.0 {
        v
    } else if p == 2.0 {
        v * v
    } else {
        v.powf(p)
    }
}

/// Largest absolute scalar coordinate.
pub fn sup_coord(x: &[f64]) -> Result<f64> {
    check_finite(x)?;
    Ok(sup_coord_unchecked(x))
}

#[inline]
pub(crate) fn sup_coord_unchecked(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `N` sampled paths sharing one [`Dims`], plus the seed that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSample {
    dims: Dims,
    data: Vec<f64>,
    seed: u64,
}

impl PathSample {
    /// Builds a sample from flat row-major data (`N * d * T` values).
    pub fn from_flat(dims: Dims, data: Vec<f64>, seed: u64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("path sample"));
        }
        if !data.len().is_multiple_of(dims.len()) {
            return Err(Error::DimensionMismatch {
                expected: dims.len(),
                found: data.len() % dims.len(),
            });
        }
        check_finite(&data)?;
        Ok(Self { dims, data, seed })
    }

    pub fn from_paths(dims: Dims, paths: &[Path], seed: u64) -> Result<Self> {
        let mut data = Vec::with_capacity(paths.len() * dims.len());
        for p in paths {
            if p.dims() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims.len(),
                    found: p.values().len(),
                });
            }
            data.extend_from_slice(p.values());
        }
        Self::from_flat(dims, data, seed)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of paths `N`.
    pub fn len(&self) -> usize {
        self.data.len() / self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Flat values of path `n`.
    pub fn path(&self, n: usize) -> &[f64] {
        let k = self.dims.len();
        &self.data[n * k..(n + 1) * k]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dims.len())
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// CSV header `t0_c0,...,t{T-1}_c{d-1}`.
    pub fn csv_header(dims: Dims) -> String {
        let mut h = String::new();
        for t in 0..dims.t() {
            for c in 0..dims.d() {
                if !h.is_empty() {
                    h.push(',');
                }
                let _ = write!(h, "t{t}_c{c}");
            }
        }
        h
    }

    /// Writes the sample as CSV with 17 significant digits per value, which
    /// round-trips every `f64` exactly.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::csv_header(self.dims))?;
        let mut line = String::new();
        for path in self.iter() {
            line.clear();
            for (k, v) in path.iter().enumerate() {
                if k > 0 {
                    line.push(',');
                }
                let _ = write!(line, "{}", fmt_exact(*v));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Reads a sample written by [`PathSample::write_csv`]. The seed of the
    /// returned sample is 0 since the format does not carry it.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or(Error::Empty("csv header"))??;
        let dims = parse_header(&header)?;
        let mut data = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let before = data.len();
            for field in line.split(',') {
                let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    line: k + 2,
                    msg: format!("not a number: {field:?}"),
                })?;
                data.push(v);
            }
            if data.len() - before != dims.len() {
                return Err(Error::Parse {
                    line: k + 2,
                    msg: format!("expected {} columns, found {}", dims.len(), data.len() - before),
                });
            }
        }
        Self::from_flat(dims, data, 0)
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_exact(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_header(header: &str) -> Result<Dims> {
    let mut max_t = 0usize;
    let mut max_c = 0usize;
    let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    let mut parsed = Vec::with_capacity(cols.len());
    for col in &cols {
        let bad = || Error::Parse {
            line: 1,
            msg: format!("bad header column {col:?}"),
        };
        let rest = col.strip_prefix('t').ok_or_else(bad)?;
        let (t, c) = rest.split_once("_c").ok_or_else(bad)?;
        let t: usize = t.parse().map_err(|_| bad())?;
        let c: usize = c.parse().map_err(|_| bad())?;
        max_t = max_t.max(t);
        max_c = max_c.max(c);
        parsed.push((t, c));
    }
    let dims = Dims::new(max_c + 1, max_t + 1)?;
    let expected: Vec<(usize, usize)> = (0..dims.t())
        .flat_map(|t| (0..dims.d()).map(move |c| (t, c)))
        .collect();
    if parsed != expected {
        return Err(Error::Parse {
            line: 1,
            msg: "header columns must be time-major t0_c0,...,t{T-1}_c{d-1}".into(),
        });
    }
    Ok(dims)
}
