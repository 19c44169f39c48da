//! Adapted Wasserstein (nested) distance between path-measure trees.
//!
//! The distance is computed by backward recursion over the levels of the two
//! trees. With `V_T = 0`,
//!
//! ```text
//! V_t(i, j) = min over couplings q of the children of i and j of
//!             sum q(a, b) (|x_a - y_b|^p + V_{t+1}(a, b)),
//! ```
//!
//! and the distance is the same transport problem between the level-1 nodes,
//! raised to `1/p`. Each subproblem is an exact transportation problem on
//! integer counts.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::PathMeasureTree;
use crate::ot::lp::LinearProgram;
use crate::ot::{sweep_1d, transport_counts, CostMatrix};
use crate::paths::{euclidean_dist, path_cost, pow_p};

/// Default cap on the number of node pairs per level.
pub const DEFAULT_BUDGET: u64 = 20_000_000;

/// Default cap on leaf pairs for [`bicausal_lp_oracle`].
pub const DEFAULT_ORACLE_CAP: usize = 400;

/// Value-to-go matrices `V_t`, one per level; `V_T` is identically zero and not
/// stored.
#[derive(Clone, Debug)]
pub struct ValueTable {
    t_max: usize,
    /// `(rows, cols, data)` for `t = 1..T-1`.
    levels: Vec<(usize, usize, Vec<f64>)>,
}

impl ValueTable {
    /// `V_t(i, j)` for node `i` of the first tree and `j` of the second at
    /// level `t`.
    pub fn get(&self, t: usize, i: usize, j: usize) -> f64 {
        if t == self.t_max {
            return 0.0;
        }
        let (rows, cols, data) = &self.levels[t - 1];
        assert!(i < *rows && j < *cols, "node pair out of range");
        data[i * cols + j]
    }

    /// `(rows, cols)` of `V_t`.
    pub fn shape(&self, t: usize) -> (usize, usize) {
        let (r, c, _) = &self.levels[t - 1];
        (*r, *c)
    }

    pub fn horizon(&self) -> usize {
        self.t_max
    }
}

/// Tuning knobs for [`aw_nested_with`].
#[derive(Clone, Copy, Debug)]
pub struct NestedOptions {
    /// Largest admissible `|mu_t| * |nu_t|` at any level.
    pub budget: u64,
}

impl Default for NestedOptions {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
        }
    }
}

fn check_pair(mu: &PathMeasureTree, nu: &PathMeasureTree, p: f64) -> Result<()> {
    if mu.dims() != nu.dims() {
        return Err(Error::DimensionMismatch {
            expected: mu.dims().len(),
            found: nu.dims().len(),
        });
    }
    if !p.is_finite() || p < 1.0 {
        return Err(Error::InvalidParameter(format!("order p must be >= 1, got {p}")));
    }
    Ok(())
}

/// Fails with [`Error::BudgetExceeded`] if some level has more node pairs than
/// `budget`.
///
/// Only pairs the recursion materialises count: for `d = 1` the last level is
/// solved by a linear-time sweep over sorted siblings and never forms its
/// pairs, so it is exempt.
pub fn check_budget(mu: &PathMeasureTree, nu: &PathMeasureTree, budget: u64) -> Result<()> {
    let t_max = mu.dims().t();
    let sweep_last = mu.dims().d() == 1;
    for (t, (a, b)) in mu.level_sizes().into_iter().zip(nu.level_sizes()).enumerate() {
        if sweep_last && t + 1 == t_max {
            continue;
        }
        let pairs = a as u64 * b as u64;
        if pairs > budget {
            return Err(Error::BudgetExceeded {
                level: t + 1,
                left: a,
                right: b,
                pairs,
                budget,
            });
        }
    }
    Ok(())
}

/// `AW_p(mu, nu)` and the value-to-go table, with the default budget.
pub fn aw_nested(mu: &PathMeasureTree, nu: &PathMeasureTree, p: f64) -> Result<(f64, ValueTable)> {
    aw_nested_with(mu, nu, p, NestedOptions::default())
}

pub fn aw_nested_with(
    mu: &PathMeasureTree,
    nu: &PathMeasureTree,
    p: f64,
    opts: NestedOptions,
) -> Result<(f64, ValueTable)> {
    check_pair(mu, nu, p)?;
    check_budget(mu, nu, opts.budget)?;
    let t_max = mu.dims().t();
    let d = mu.dims().d();

    let mut tables: Vec<(usize, usize, Vec<f64>)> = Vec::with_capacity(t_max - 1);
    for t in (1..t_max).rev() {
        let (lm, ln) = (mu.level(t), nu.level(t));
        let (cm, cn) = (mu.level(t + 1), nu.level(t + 1));
        let next = tables.last();
        let cols = ln.len();
        let data: Vec<f64> = lm
            .par_iter()
            .flat_map_iter(|a| {
                ln.iter().map(move |b| {
                    let vtg = next.map(|(_, c, v)| (v.as_slice(), *c));
                    stage_cost(
                        &cm[a.children.clone()],
                        a.children.start,
                        &cn[b.children.clone()],
                        b.children.start,
                        vtg,
                        d,
                        p,
                    )
                })
            })
            .collect();
        tables.push((lm.len(), cols, data));
    }
    let root = {
        let vtg = tables.last().map(|(_, c, v)| (v.as_slice(), *c));
        stage_cost(mu.level(1), 0, nu.level(1), 0, vtg, d, p)
    };
    tables.reverse();
    let value = if p == 1.0 { root } else { root.max(0.0).powf(1.0 / p) };
    Ok((
        value,
        ValueTable {
            t_max,
            levels: tables,
        },
    ))
}

/// Optimal transport cost between two sibling groups, with the value-to-go
/// of the next level (a row-major matrix with `cols` columns) added to the
/// ground cost.
fn stage_cost(
    xs: &[crate::measure::TreeNode],
    x0: usize,
    ys: &[crate::measure::TreeNode],
    y0: usize,
    vtg: Option<(&[f64], usize)>,
    d: usize,
    p: f64,
) -> f64 {
    let a: Vec<u64> = xs.iter().map(|n| n.count).collect();
    let b: Vec<u64> = ys.iter().map(|n| n.count).collect();
    match vtg {
        // siblings are sorted, so on the line the monotone coupling is optimal
        None if d == 1 => {
            let px: Vec<f64> = xs.iter().map(|n| n.point[0]).collect();
            let py: Vec<f64> = ys.iter().map(|n| n.point[0]).collect();
            sweep_1d(&px, &a, &py, &b, p)
        }
        _ => {
            let cost = CostMatrix::from_fn(xs.len(), ys.len(), |i, j| {
                let c = pow_p(euclidean_dist(&xs[i].point, &ys[j].point), p);
                match vtg {
                    Some((v, cols)) => c + v[(x0 + i) * cols + y0 + j],
                    None => c,
                }
            });
            transport_counts(&a, &b, &cost).cost
        }
    }
}

/// Leaf index ranges of every node, level by level.
fn leaf_ranges(tree: &PathMeasureTree) -> Vec<Vec<std::ops::Range<usize>>> {
    let t_max = tree.dims().t();
    let mut out = vec![Vec::new(); t_max];
    out[t_max - 1] = (0..tree.leaf_count()).map(|i| i..i + 1).collect();
    for t in (1..t_max).rev() {
        let below = &out[t];
        out[t - 1] = tree
            .level(t)
            .iter()
            .map(|n| below[n.children.start].start..below[n.children.end - 1].end)
            .collect();
    }
    out
}

/// Solves the bicausal transport LP directly over joint leaf probabilities
/// with the dense simplex. Intended for verification at small sizes.
pub fn bicausal_lp_oracle(mu: &PathMeasureTree, nu: &PathMeasureTree, p: f64) -> Result<f64> {
    bicausal_lp_oracle_with_cap(mu, nu, p, DEFAULT_ORACLE_CAP)
}

pub fn bicausal_lp_oracle_with_cap(
    mu: &PathMeasureTree,
    nu: &PathMeasureTree,
    p: f64,
    cap: usize,
) -> Result<f64> {
    check_pair(mu, nu, p)?;
    let (lm, ln) = (mu.leaf_count(), nu.leaf_count());
    let pairs = lm * ln;
    if pairs > cap {
        return Err(Error::OracleCapExceeded { pairs, cap });
    }
    let d = mu.dims().d();
    let t_max = mu.dims().t();
    let var = |a: usize, b: usize| a * ln + b;
    let mut lp = LinearProgram::new(pairs);
    let (xl, yl) = (mu.leaves(), nu.leaves());
    for (a, (x, _)) in xl.iter().enumerate() {
        for (b, (y, _)) in yl.iter().enumerate() {
            lp.set_cost(var(a, b), path_cost(x, y, d, p));
        }
    }
    for (a, (_, c)) in xl.iter().enumerate() {
        lp.add_eq(
            (0..ln).map(|b| (var(a, b), 1.0)).collect(),
            *c as f64 / mu.total() as f64,
        );
    }
    for (b, (_, c)) in yl.iter().enumerate() {
        lp.add_eq(
            (0..lm).map(|a| (var(a, b), 1.0)).collect(),
            *c as f64 / nu.total() as f64,
        );
    }

    let (rm, rn) = (leaf_ranges(mu), leaf_ranges(nu));
    // given both prefixes up to t, the next step of one process follows its
    // own kernel:
    //   count(u) * pi(a-subtree x v-subtree) = count(a) * pi(u-subtree x v-subtree)
    // for every child a of u. The row of the last child is implied by the
    // others and is left out.
    let block = |xr: &std::ops::Range<usize>, yr: &std::ops::Range<usize>, w: f64, swap: bool, row: &mut Vec<(usize, f64)>| {
        for i in xr.clone() {
            for j in yr.clone() {
                let v = if swap { var(j, i) } else { var(i, j) };
                row.push((v, w));
            }
        }
    };
    for (tree, other, ranges, other_ranges, swap) in [
        (mu, nu, &rm, &rn, false),
        (nu, mu, &rn, &rm, true),
    ] {
        for t in 1..t_max {
            for (ui, u) in tree.level(t).iter().enumerate() {
                let kids = u.children.clone();
                for ai in kids.start..kids.end - 1 {
                    let a = &tree.level(t + 1)[ai];
                    for yr in &other_ranges[t - 1][..other.level(t).len()] {
                        let mut row = Vec::new();
                        block(&ranges[t][ai], yr, u.count as f64, swap, &mut row);
                        block(&ranges[t - 1][ui], yr, -(a.count as f64), swap, &mut row);
                        lp.add_eq(row, 0.0);
                    }
                }
            }
        }
    }
    let sol = lp.solve()?;
    let v = sol.objective.max(0.0);
    Ok(if p == 1.0 { v } else { v.powf(1.0 / p) })
}

/// Wasserstein distance between the two trees viewed as measures on
/// `R^{dT}` with cost `sum_t |x_t - y_t|^p`, ignoring the filtration.
pub fn w_flat(mu: &PathMeasureTree, nu: &PathMeasureTree, p: f64) -> Result<f64> {
    check_pair(mu, nu, p)?;
    let d = mu.dims().d();
    let (xl, yl) = (mu.leaves(), nu.leaves());
    let a: Vec<u64> = xl.iter().map(|l| l.1).collect();
    let b: Vec<u64> = yl.iter().map(|l| l.1).collect();
    let k = mu.dims().len();
    // if both supports lie on one common axis-parallel line the cost reduces
    // to |x_k - y_k|^p in the single varying coordinate
    let first = &xl[0].0;
    let varying: Vec<usize> = (0..k)
        .filter(|&c| {
            xl.iter()
                .map(|l| &l.0)
                .chain(yl.iter().map(|l| &l.0))
                .any(|x| x[c] != first[c])
        })
        .collect();
    let obj = if varying.len() <= 1 {
        let c = varying.first().copied().unwrap_or(0);
        let mut xs: Vec<(f64, u64)> = xl.iter().map(|l| (l.0[c], l.1)).collect();
        let mut ys: Vec<(f64, u64)> = yl.iter().map(|l| (l.0[c], l.1)).collect();
        xs.sort_by(|u, v| u.0.total_cmp(&v.0));
        ys.sort_by(|u, v| u.0.total_cmp(&v.0));
        let (px, ca): (Vec<f64>, Vec<u64>) = xs.into_iter().unzip();
        let (py, cb): (Vec<f64>, Vec<u64>) = ys.into_iter().unzip();
        sweep_1d(&px, &ca, &py, &cb, p)
    } else {
        let cost = CostMatrix::from_fn(xl.len(), yl.len(), |i, j| path_cost(&xl[i].0, &yl[j].0, d, p));
        transport_counts(&a, &b, &cost).cost
    };
    Ok(if p == 1.0 { obj } else { obj.max(0.0).powf(1.0 / p) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{figure1_pair, random_tree};
    use crate::paths::Dims;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    #[test]
    fn two_leaf_values() {
        let (mu, nu) = figure1_pair(0.25).unwrap();
        let (aw, table) = aw_nested(&mu, &nu, 1.0).unwrap();
        assert!((aw - 1.25).abs() <= 1e-12);
        assert!((w_flat(&mu, &nu, 1.0).unwrap() - 0.25).abs() <= 1e-12);
        assert!((bicausal_lp_oracle(&mu, &nu, 1.0).unwrap() - 1.25).abs() <= 1e-9);
        assert_eq!(table.horizon(), 2);
        assert_eq!(table.shape(1), (1, 2));
        // from the single root of mu: |+-1 - (+-1)| averaged over the forced
        // independent coupling
        assert_eq!(table.get(1, 0, 0), 1.0);
        assert_eq!(table.get(2, 0, 1), 0.0);
    }

    #[test]
    fn identical_trees_are_at_zero() {
        let mut rng = SeededRng::new(3);
        for t in [2, 3] {
            let mu = random_tree(Dims::new(2, t).unwrap(), 3, &mut rng).unwrap();
            assert_eq!(aw_nested(&mu, &mu, 1.0).unwrap().0, 0.0);
            assert_eq!(w_flat(&mu, &mu, 1.0).unwrap(), 0.0);
            assert!(bicausal_lp_oracle(&mu, &mu, 1.0).unwrap().abs() <= 1e-9);
        }
    }

    #[test]
    fn matches_lp_oracle() {
        let mut rng = SeededRng::new(11);
        for k in 0..40 {
            let dims = Dims::new(1 + k % 2, 2 + k % 2).unwrap();
            let mu = random_tree(dims, 3, &mut rng).unwrap();
            let nu = random_tree(dims, 3, &mut rng).unwrap();
            for p in [1.0, 2.0] {
                let aw = aw_nested(&mu, &nu, p).unwrap().0;
                let lp = bicausal_lp_oracle_with_cap(&mu, &nu, p, 729).unwrap();
                assert!((aw - lp).abs() <= 1e-8, "k={k} p={p}: {aw} vs {lp}");
            }
        }
    }

    #[test]
    fn oracle_cap_is_enforced() {
        let mut rng = SeededRng::new(4);
        let dims = Dims::new(1, 3).unwrap();
        let mu = random_tree(dims, 3, &mut rng).unwrap();
        let err = bicausal_lp_oracle_with_cap(&mu, &mu, 1.0, 1).unwrap_err();
        assert!(matches!(err, Error::OracleCapExceeded { cap: 1, .. }));
    }

    #[test]
    fn budget_guard() {
        let (mu, nu) = figure1_pair(0.5).unwrap();
        let err = aw_nested_with(&mu, &nu, 1.0, NestedOptions { budget: 1 }).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { level: 1, pairs: 2, .. }));
        // on the line the last level is swept, not paired
        assert!(aw_nested_with(&mu, &nu, 1.0, NestedOptions { budget: 2 }).is_ok());
        let mut rng = SeededRng::new(5);
        let dims = Dims::new(2, 2).unwrap();
        let a = random_tree(dims, 3, &mut rng).unwrap();
        let pairs = (a.leaf_count() * a.leaf_count()) as u64;
        let err = aw_nested_with(&a, &a, 1.0, NestedOptions { budget: pairs - 1 }).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { level: 2, .. }));
    }

    #[test]
    fn mismatched_dims() {
        let (mu, _) = figure1_pair(0.5).unwrap();
        let mut rng = SeededRng::new(1);
        let nu = random_tree(Dims::new(2, 2).unwrap(), 2, &mut rng).unwrap();
        assert!(aw_nested(&mu, &nu, 1.0).is_err());
        assert!(w_flat(&mu, &nu, 1.0).is_err());
    }

    #[test]
    fn flat_line_shortcut_agrees_with_simplex() {
        // supports on a common line through the second coordinate
        let dims = Dims::new(1, 2).unwrap();
        let mut rng = SeededRng::new(8);
        for _ in 0..50 {
            let leaves = |rng: &mut SeededRng| -> Vec<(Vec<f64>, u64)> {
                (0..6).map(|_| (vec![0.0, rng.normal()], 1 + rng.next_u64() % 4)).collect()
            };
            let mu = PathMeasureTree::from_leaves(dims, leaves(&mut rng)).unwrap();
            let nu = PathMeasureTree::from_leaves(dims, leaves(&mut rng)).unwrap();
            let (xl, yl) = (mu.leaves(), nu.leaves());
            let cost = CostMatrix::from_fn(xl.len(), yl.len(), |i, j| path_cost(&xl[i].0, &yl[j].0, 1, 1.0));
            let a: Vec<u64> = xl.iter().map(|l| l.1).collect();
            let b: Vec<u64> = yl.iter().map(|l| l.1).collect();
            let direct = transport_counts(&a, &b, &cost).cost;
            assert!((w_flat(&mu, &nu, 1.0).unwrap() - direct).abs() <= 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn flat_is_dominated(seed in any::<u64>(), t in 2usize..4, d in 1usize..3) {
            let mut rng = SeededRng::new(seed);
            let dims = Dims::new(d, t).unwrap();
            let mu = random_tree(dims, 3, &mut rng).unwrap();
            let nu = random_tree(dims, 3, &mut rng).unwrap();
            let aw = aw_nested(&mu, &nu, 1.0).unwrap().0;
            prop_assert!(w_flat(&mu, &nu, 1.0).unwrap() <= aw + 1e-9);
        }

        #[test]
        fn symmetric_and_triangle(seed in any::<u64>()) {
            let mut rng = SeededRng::new(seed);
            let dims = Dims::new(1, 3).unwrap();
            let a = random_tree(dims, 2, &mut rng).unwrap();
            let b = random_tree(dims, 2, &mut rng).unwrap();
            let c = random_tree(dims, 2, &mut rng).unwrap();
            let ab = aw_nested(&a, &b, 1.0).unwrap().0;
            let ba = aw_nested(&b, &a, 1.0).unwrap().0;
            prop_assert_eq!(ab, ba);
            let bc = aw_nested(&b, &c, 1.0).unwrap().0;
            let ac = aw_nested(&a, &c, 1.0).unwrap().0;
            prop_assert!(ac <= ab + bc + 1e-9);
        }

        #[test]
        fn translation_and_scaling(seed in any::<u64>(), shift in -10.0f64..10.0, s in 0.1f64..10.0) {
            let mut rng = SeededRng::new(seed);
            let dims = Dims::new(2, 2).unwrap();
            let mu = random_tree(dims, 3, &mut rng).unwrap();
            let nu = random_tree(dims, 3, &mut rng).unwrap();
            let aw = aw_nested(&mu, &nu, 1.0).unwrap().0;
            // dyadic shifts and scales keep coordinates exact
            let shift = (shift * 8.0).round() / 8.0;
            let s = (s * 4.0).round().max(1.0) / 4.0;
            let tr = |tree: &PathMeasureTree| tree.map_points(|_, x| x.iter().map(|v| v + shift).collect()).unwrap();
            let sc = |tree: &PathMeasureTree| tree.map_points(|_, x| x.iter().map(|v| v * s).collect()).unwrap();
            let shifted = aw_nested(&tr(&mu), &tr(&nu), 1.0).unwrap().0;
            prop_assert!((shifted - aw).abs() <= 1e-12);
            let scaled = aw_nested(&sc(&mu), &sc(&nu), 1.0).unwrap().0;
            prop_assert!((scaled - s * aw).abs() <= 1e-12);
        }
    }
}
