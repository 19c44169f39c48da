//! Finitely supported measures.
//!
//! Weights are integer counts over a common denominator. Real-valued weights
//! are only materialised where a solver needs them.

mod tree;

pub use tree::{adapted_empirical, empirical, PathMeasureTree, TreeNode};

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use num_integer::Integer;

use crate::error::{Error, Result};
use crate::paths::{check_finite, euclidean, fmt_exact, pow_p};

/// Lexicographic order on points via `f64::total_cmp`.
pub(crate) fn cmp_points(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// A probability measure on `R^d` with finitely many atoms.
///
/// Atoms are pairwise distinct (bit-exact) and sorted lexicographically;
/// `counts[i] / denom` is the weight of atom `i`, and the counts sum to
/// `denom`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<f64>,
    counts: Vec<u64>,
    denom: u64,
}

impl DiscreteMeasure {
    /// Builds a measure from `(atom, count)` pairs. Equal atoms are merged and
    /// the counts are normalised by their sum.
    pub fn from_pairs<I, P>(dim: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (P, u64)>,
        P: AsRef<[f64]>,
    {
        if dim == 0 {
            return Err(Error::InvalidDims("measure dimension must be >= 1".into()));
        }
        let mut items: Vec<(Vec<f64>, u64)> = Vec::new();
        for (p, c) in pairs {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            check_finite(p)?;
            if c == 0 {
                return Err(Error::InvalidParameter("atom weights must be positive".into()));
            }
            items.push((p.to_vec(), c));
        }
        if items.is_empty() {
            return Err(Error::Empty("discrete measure"));
        }
        items.sort_by(|a, b| cmp_points(&a.0, &b.0));
        let mut atoms = Vec::with_capacity(items.len() * dim);
        let mut counts: Vec<u64> = Vec::with_capacity(items.len());
        let mut last: Option<Vec<f64>> = None;
        for (p, c) in items {
            if last.as_deref().is_some_and(|l| cmp_points(l, &p) == Ordering::Equal) {
                let k = counts.len() - 1;
                counts[k] = counts[k]
                    .checked_add(c)
                    .ok_or_else(|| Error::InvalidParameter("weight counts overflow".into()))?;
            } else {
                atoms.extend_from_slice(&p);
                counts.push(c);
                last = Some(p);
            }
        }
        let g = counts.iter().fold(0u64, |g, c| g.gcd(c));
        counts.iter_mut().for_each(|c| *c /= g);
        let denom = counts
            .iter()
            .try_fold(0u64, |s, c| s.checked_add(*c))
            .ok_or_else(|| Error::InvalidParameter("weight counts overflow".into()))?;
        Ok(Self {
            dim,
            atoms,
            counts,
            denom,
        })
    }

    pub fn dirac(point: &[f64]) -> Result<Self> {
        Self::from_pairs(point.len(), [(point, 1)])
    }

    /// Equal weights on the given points (duplicates accumulate weight).
    pub fn uniform<P: AsRef<[f64]>>(dim: usize, points: impl IntoIterator<Item = P>) -> Result<Self> {
        Self::from_pairs(dim, points.into_iter().map(|p| (p, 1)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.dim..(i + 1) * self.dim]
    }

    pub fn atoms(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.atoms.chunks_exact(self.dim)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn denom(&self) -> u64 {
        self.denom
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.counts[i] as f64 / self.denom as f64
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    /// `sum_i w_i |x_i|^p`.
    pub fn moment(&self, p: f64) -> f64 {
        self.atoms()
            .zip(&self.counts)
            .map(|(a, c)| *c as f64 * pow_p(euclidean(a), p))
            .sum::<f64>()
            / self.denom as f64
    }

    /// `sum_i w_i exp(gamma |x_i|^alpha)`.
    pub fn exp_moment(&self, alpha: f64, gamma: f64) -> f64 {
        self.atoms()
            .zip(&self.counts)
            .map(|(a, c)| *c as f64 * (gamma * euclidean(a).powf(alpha)).exp())
            .sum::<f64>()
            / self.denom as f64
    }

    /// Reads `x_0,...,x_{d-1},weight` rows. A header row is optional. Weights
    /// may be decimals (`0.25`, `1e-3`) or fractions (`3/8`); they are parsed
    /// exactly and normalised by their sum.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut rows: Vec<(Vec<f64>, Rational)> = Vec::new();
        let mut dim = None;
        for (k, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() < 2 {
                return Err(Error::Parse {
                    line: k + 1,
                    msg: "need at least one coordinate and a weight".into(),
                });
            }
            let (coords, w) = fields.split_at(fields.len() - 1);
            let parsed: std::result::Result<Vec<f64>, _> =
                coords.iter().map(|f| f.parse::<f64>()).collect();
            let Ok(point) = parsed else {
                if rows.is_empty() && dim.is_none() {
                    // header
                    dim = Some(coords.len());
                    continue;
                }
                return Err(Error::Parse {
                    line: k + 1,
                    msg: format!("bad coordinates in {line:?}"),
                });
            };
            let weight = parse_rational(w[0]).ok_or_else(|| Error::Parse {
                line: k + 1,
                msg: format!("bad weight {:?}", w[0]),
            })?;
            match dim {
                Some(d) if d != point.len() => {
                    return Err(Error::Parse {
                        line: k + 1,
                        msg: format!("expected {d} coordinates, found {}", point.len()),
                    })
                }
                _ => dim = Some(point.len()),
            }
            rows.push((point, weight));
        }
        let dim = dim.ok_or(Error::Empty("measure file"))?;
        let rows: Vec<(Vec<f64>, Rational)> =
            rows.into_iter().filter(|(_, w)| w.num != 0).collect();
        if rows.is_empty() {
            return Err(Error::Empty("measure file"));
        }
        let overflow = || Error::InvalidParameter("weights need too large a common denominator".into());
        let lcm = rows
            .iter()
            .try_fold(1u128, |l, (_, w)| {
                let g = l.gcd(&w.den);
                (l / g).checked_mul(w.den)
            })
            .ok_or_else(overflow)?;
        let mut pairs = Vec::with_capacity(rows.len());
        for (p, w) in rows {
            let c = w.num.checked_mul(lcm / w.den).ok_or_else(overflow)?;
            pairs.push((p, c));
        }
        let g = pairs.iter().fold(0u128, |g, (_, c)| g.gcd(c));
        let pairs: Option<Vec<(Vec<f64>, u64)>> = pairs
            .into_iter()
            .map(|(p, c)| u64::try_from(c / g).ok().map(|c| (p, c)))
            .collect();
        Self::from_pairs(dim, pairs.ok_or_else(overflow)?)
    }

    /// Writes `x_0,...,x_{d-1},weight` rows with a header; weights are written
    /// as exact fractions `count/denom`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::new();
        for c in 0..self.dim {
            let _ = write!(header, "x_{c},");
        }
        header.push_str("weight");
        writeln!(w, "{header}")?;
        for (a, c) in self.atoms().zip(&self.counts) {
            let mut line = String::new();
            for v in a {
                let _ = write!(line, "{},", fmt_exact(*v));
            }
            let _ = write!(line, "{c}/{}", self.denom);
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Rational {
    num: u128,
    den: u128,
}

/// Parses a nonnegative decimal or `a/b` fraction exactly.
fn parse_rational(s: &str) -> Option<Rational> {
    if let Some((a, b)) = s.split_once('/') {
        let num: u128 = a.trim().parse().ok()?;
        let den: u128 = b.trim().parse().ok()?;
        if den == 0 {
            return None;
        }
        return Some(reduce(num, den));
    }
    let s = s.strip_prefix('+').unwrap_or(s);
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(k) => (&s[..k], s[k + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let mut num: u128 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
    let mut scale = frac.len() as i32 - exp;
    while scale < 0 {
        num = num.checked_mul(10)?;
        scale += 1;
    }
    let den = 10u128.checked_pow(scale as u32)?;
    Some(reduce(num, den))
}

fn reduce(num: u128, den: u128) -> Rational {
    let g = num.gcd(&den).max(1);
    Rational {
        num: num / g,
        den: den / g,
    }
}

/// Declared regularity of a model. Purely descriptive; nothing checks it.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ModelMetadata {
    /// Lipschitz constant `L` of the kernels.
    pub lipschitz_l: Option<f64>,
    /// Growth `r` of the noise scale.
    pub growth_r: Option<f64>,
    /// Order `p` of the uniform noise moment.
    pub moment_p: Option<f64>,
    /// Order `q` of the finite moment of the measure.
    pub moment_q: Option<f64>,
    /// Exponential noise moment parameters.
    pub exp_alpha: Option<f64>,
    pub exp_gamma: Option<f64>,
}
