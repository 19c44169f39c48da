use std::cmp::Ordering;
use std::fmt::Write as _;
use std::ops::Range;

use super::{cmp_points, DiscreteMeasure};
use crate::error::{Error, Result};
use crate::grid::{ring_of_sup, GridSpec};
use crate::paths::{check_finite, pow_p, sum_norm_unchecked, sup_coord_unchecked, Dims, PathSample};

/// One node of a [`PathMeasureTree`].
#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    /// Value of the process at this node's time.
    pub point: Vec<f64>,
    /// Number of leaf units below this node; the unconditional weight is
    /// `count / total`.
    pub count: u64,
    /// Index of the parent in the previous level (unused at level 1).
    pub parent: usize,
    /// Children in the next level (empty at level `T`).
    pub children: Range<usize>,
}

/// A finitely supported law on `R^{dT}` stored as successive conditional
/// kernels.
///
/// Level `t` (1-based) holds the distinct prefixes `x_{1:t}`; a node's
/// conditional weight given its parent is `count / parent.count`, with the
/// level-0 pseudo-root carrying `total`. Children of every node are sorted
/// lexicographically by point and occupy a contiguous index range, which makes
/// the representation canonical.
#[derive(Clone, Debug, PartialEq)]
pub struct PathMeasureTree {
    dims: Dims,
    total: u64,
    levels: Vec<Vec<TreeNode>>,
}

impl PathMeasureTree {
    /// Builds the tree of the measure `sum_k c_k delta_{x_k} / sum_k c_k`.
    ///
    /// Leaves are flat paths of length `d * T`; equal paths are merged.
    pub fn from_leaves<I, P>(dims: Dims, leaves: I) -> Result<Self>
    where
        I: IntoIterator<Item = (P, u64)>,
        P: AsRef<[f64]>,
    {
        let mut items: Vec<(Vec<f64>, u64)> = Vec::new();
        for (p, c) in leaves {
            let p = p.as_ref();
            if p.len() != dims.len() {
                return Err(Error::DimensionMismatch {
                    expected: dims.len(),
                    found: p.len(),
                });
            }
            check_finite(p)?;
            if c == 0 {
                return Err(Error::InvalidParameter("leaf counts must be positive".into()));
            }
            items.push((p.to_vec(), c));
        }
        if items.is_empty() {
            return Err(Error::Empty("path measure"));
        }
        items.sort_by(|a, b| cmp_points(&a.0, &b.0));
        Self::from_sorted(dims, items)
    }

    fn from_sorted(dims: Dims, items: Vec<(Vec<f64>, u64)>) -> Result<Self> {
        let d = dims.d();
        let t_max = dims.t();
        let overflow = || Error::InvalidParameter("leaf counts overflow".into());
        let mut levels: Vec<Vec<TreeNode>> = vec![Vec::new(); t_max];
        let mut total = 0u64;
        let mut prev: Option<&[f64]> = None;
        for (path, c) in &items {
            total = total.checked_add(*c).ok_or_else(overflow)?;
            // first time at which this path departs from the previous one
            let split = match prev {
                None => 0,
                Some(q) => (0..t_max)
                    .find(|&t| {
                        cmp_points(&q[t * d..(t + 1) * d], &path[t * d..(t + 1) * d])
                            != Ordering::Equal
                    })
                    .unwrap_or(t_max),
            };
            for level in levels.iter_mut().take(split) {
                let last = level.last_mut().expect("shared prefix has a node");
                last.count = last.count.checked_add(*c).ok_or_else(overflow)?;
            }
            for t in split..t_max {
                let parent = if t == 0 { 0 } else { levels[t - 1].len() - 1 };
                levels[t].push(TreeNode {
                    point: path[t * d..(t + 1) * d].to_vec(),
                    count: *c,
                    parent,
                    children: 0..0,
                });
            }
            prev = Some(path);
        }
        for t in 1..t_max {
            let (upper, lower) = levels.split_at_mut(t);
            let parents = &mut upper[t - 1];
            for (k, child) in lower[0].iter().enumerate() {
                let r = &mut parents[child.parent].children;
                if r.start == r.end {
                    *r = k..k + 1;
                } else {
                    r.end = k + 1;
                }
            }
        }
        Ok(Self {
            dims,
            total,
            levels,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Common denominator of all weights (sum of leaf counts).
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Nodes at level `t`, `1 <= t <= T`.
    pub fn level(&self, t: usize) -> &[TreeNode] {
        &self.levels[t - 1]
    }

    pub fn levels(&self) -> &[Vec<TreeNode>] {
        &self.levels
    }

    /// Number of nodes at each level.
    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(Vec::len).collect()
    }

    pub fn leaf_count(&self) -> usize {
        self.levels[self.levels.len() - 1].len()
    }

    /// Conditional weight of node `i` at level `t` given its parent, as
    /// `(numerator, denominator)`.
    pub fn conditional_weight(&self, t: usize, i: usize) -> (u64, u64) {
        let node = &self.levels[t - 1][i];
        let den = if t == 1 {
            self.total
        } else {
            self.levels[t - 2][node.parent].count
        };
        (node.count, den)
    }

    /// Unconditional weight of node `i` at level `t`.
    pub fn weight(&self, t: usize, i: usize) -> f64 {
        self.levels[t - 1][i].count as f64 / self.total as f64
    }

    /// Prefix `x_{1:t}` of node `i` at level `t`, flattened.
    pub fn prefix(&self, t: usize, i: usize) -> Vec<f64> {
        let d = self.dims.d();
        let mut out = vec![0.0; t * d];
        let mut k = i;
        for s in (0..t).rev() {
            let node = &self.levels[s][k];
            out[s * d..(s + 1) * d].copy_from_slice(&node.point);
            k = node.parent;
        }
        out
    }

    /// Leaves as `(path, count)` pairs in canonical order.
    pub fn leaves(&self) -> Vec<(Vec<f64>, u64)> {
        let t = self.dims.t();
        (0..self.leaf_count())
            .map(|i| (self.prefix(t, i), self.levels[t - 1][i].count))
            .collect()
    }

    /// The `t`-th marginal on `R^d`.
    pub fn marginal(&self, t: usize) -> Result<DiscreteMeasure> {
        self.check_level(t)?;
        DiscreteMeasure::from_pairs(
            self.dims.d(),
            self.levels[t - 1].iter().map(|n| (n.point.as_slice(), n.count)),
        )
    }

    /// `M_p = sum over leaves of w |x|^p` with the sum-norm.
    pub fn moment(&self, p: f64) -> f64 {
        let d = self.dims.d();
        self.leaves()
            .iter()
            .map(|(x, c)| *c as f64 * pow_p(sum_norm_unchecked(x, d), p))
            .sum::<f64>()
            / self.total as f64
    }

    /// `E_{alpha,gamma} = sum over leaves of w exp(gamma |x|^alpha)`.
    pub fn exp_moment(&self, alpha: f64, gamma: f64) -> f64 {
        let d = self.dims.d();
        self.leaves()
            .iter()
            .map(|(x, c)| *c as f64 * (gamma * sum_norm_unchecked(x, d).powf(alpha)).exp())
            .sum::<f64>()
            / self.total as f64
    }

    /// Sup-norm of the prefix of every node at level `t`.
    pub fn prefix_sups(&self, t: usize) -> Vec<f64> {
        let mut sups: Vec<f64> = self.levels[0]
            .iter()
            .map(|n| sup_coord_unchecked(&n.point))
            .collect();
        for s in 1..t {
            sups = self.levels[s]
                .iter()
                .map(|n| sups[n.parent].max(sup_coord_unchecked(&n.point)))
                .collect();
        }
        sups
    }

    /// Mass of prefixes `x_{1:t}` in the cubic ring `A^t_j`, as
    /// `(count, total)`.
    pub fn ring_mass(&self, t: usize, j: u32) -> Result<(u64, u64)> {
        self.check_level(t)?;
        let mut mass = 0u64;
        for (node, s) in self.levels[t - 1].iter().zip(self.prefix_sups(t)) {
            if ring_of_sup(s)? == j {
                mass += node.count;
            }
        }
        Ok((mass, self.total))
    }

    fn check_level(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.dims.t() {
            return Err(Error::OutOfRange {
                index: t,
                min: 1,
                max: self.dims.t(),
            });
        }
        Ok(())
    }

    /// Applies `f` to every point (time index, point) and rebuilds the tree.
    pub fn map_points<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, &[f64]) -> Vec<f64>,
    {
        let d = self.dims.d();
        let leaves = self.leaves().into_iter().map(|(x, c)| {
            let y: Vec<f64> = x
                .chunks_exact(d)
                .enumerate()
                .flat_map(|(t, p)| f(t, p))
                .collect();
            (y, c)
        });
        Self::from_leaves(self.dims, leaves.collect::<Vec<_>>())
    }

    /// Text dump, one leaf per line: `count/N;x_1;...;x_T`, each `x_t` a
    /// comma-separated `d`-vector.
    pub fn dump(&self) -> String {
        let d = self.dims.d();
        let mut out = String::new();
        for (x, c) in self.leaves() {
            let _ = write!(out, "{c}/{}", self.total);
            for p in x.chunks_exact(d) {
                out.push(';');
                for (k, v) in p.iter().enumerate() {
                    if k > 0 {
                        out.push(',');
                    }
                    let _ = write!(out, "{v:?}");
                }
            }
            out.push('\n');
        }
        out
    }

    /// Parses a dump written by [`PathMeasureTree::dump`]. Every line must use
    /// the same denominator and the counts must sum to it.
    pub fn parse_dump(text: &str) -> Result<Self> {
        let mut dims: Option<Dims> = None;
        let mut denom: Option<u64> = None;
        let mut leaves = Vec::new();
        let mut sum = 0u64;
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse { line: k + 1, msg };
            let mut parts = line.split(';');
            let w = parts.next().unwrap_or_default();
            let (c, n) = w
                .split_once('/')
                .ok_or_else(|| err(format!("expected count/N, found {w:?}")))?;
            let c: u64 = c.trim().parse().map_err(|_| err(format!("bad count {c:?}")))?;
            let n: u64 = n.trim().parse().map_err(|_| err(format!("bad denominator {n:?}")))?;
            if *denom.get_or_insert(n) != n {
                return Err(err("denominators differ between lines".into()));
            }
            let mut values = Vec::new();
            let mut t = 0;
            let mut d = None;
            for part in parts {
                let before = values.len();
                for v in part.split(',') {
                    values.push(
                        v.trim()
                            .parse::<f64>()
                            .map_err(|_| err(format!("bad coordinate {v:?}")))?,
                    );
                }
                let len = values.len() - before;
                if *d.get_or_insert(len) != len {
                    return Err(err("points of one path differ in dimension".into()));
                }
                t += 1;
            }
            let here = Dims::new(d.unwrap_or(0), t).map_err(|e| err(e.to_string()))?;
            if *dims.get_or_insert(here) != here {
                return Err(err("paths differ in shape".into()));
            }
            sum = sum
                .checked_add(c)
                .ok_or_else(|| err("counts overflow".into()))?;
            leaves.push((values, c));
        }
        let (Some(dims), Some(denom)) = (dims, denom) else {
            return Err(Error::Empty("tree dump"));
        };
        if sum != denom {
            return Err(Error::Parse {
                line: 0,
                msg: format!("counts sum to {sum}, denominator is {denom}"),
            });
        }
        Self::from_leaves(dims, leaves)
    }
}

/// Empirical measure of a sample: weight `1/N` per path, equal paths merged.
pub fn empirical(sample: &PathSample) -> Result<PathMeasureTree> {
    PathMeasureTree::from_leaves(sample.dims(), sample.iter().map(|p| (p, 1)))
}

/// Empirical measure of the grid-projected sample.
pub fn adapted_empirical(sample: &PathSample, spec: &GridSpec) -> Result<PathMeasureTree> {
    if sample.dims() != spec.dims() {
        return Err(Error::DimensionMismatch {
            expected: spec.dims().len(),
            found: sample.dims().len(),
        });
    }
    let k = sample.dims().len();
    let mut projected = vec![0.0; sample.data().len()];
    for (x, out) in sample.iter().zip(projected.chunks_exact_mut(k)) {
        spec.project_into(x, out, false)?;
    }
    PathMeasureTree::from_leaves(sample.dims(), projected.chunks_exact(k).map(|p| (p, 1)))
}
