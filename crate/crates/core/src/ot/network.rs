//! Network simplex for the balanced transportation problem.
//!
//! Sources `0..m`, sinks `0..n`, one arc per pair with id `i * n + j`. The
//! basis is a spanning tree of `m + n - 1` arcs (degenerate arcs included),
//! started from the north-west corner rule. Entering arcs are priced by block
//! search; after a run of degenerate pivots the solver switches to Bland's
//! rule (lowest arc id with negative reduced cost) until the next pivot that
//! moves flow. Leaving arcs are the lowest id among the tied bottlenecks. A
//! cycle would consist of degenerate pivots only and so would eventually run
//! under Bland's rule, which cannot cycle; termination is therefore finite.

use std::fmt::Debug;
use std::ops::{Add, Sub};

use super::CostMatrix;

/// Arithmetic the solver needs from a flow quantity.
pub(crate) trait Mass:
    Copy + PartialOrd + Add<Output = Self> + Sub<Output = Self> + Debug + Send + Sync
{
    const ZERO: Self;
    fn to_f64(self) -> f64;
    /// Whether a bottleneck of this size counts as a degenerate pivot.
    fn is_degenerate(self) -> bool;
}

impl Mass for i64 {
    const ZERO: Self = 0;

    fn to_f64(self) -> f64 {
        self as f64
    }

    fn is_degenerate(self) -> bool {
        self == 0
    }
}

impl Mass for f64 {
    const ZERO: Self = 0.0;

    fn to_f64(self) -> f64 {
        self
    }

    fn is_degenerate(self) -> bool {
        self <= 1e-15
    }
}

#[derive(Debug)]
pub(crate) struct NetworkSolution<Q> {
    /// Basic arcs `(i, j, flow)`, zero flows included.
    pub basis: Vec<(usize, usize, Q)>,
    pub row_potentials: Vec<f64>,
    pub col_potentials: Vec<f64>,
    /// `sum flow * cost` in the units of the supplies.
    pub objective: f64,
    pub converged: bool,
}

struct Tree {
    parent: Vec<usize>,
    parent_arc: Vec<usize>,
    depth: Vec<usize>,
    potential: Vec<f64>,
    order: Vec<usize>,
}

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const BLAND_AFTER: usize = 50;

pub(crate) fn solve<Q: Mass>(supply: &[Q], demand: &[Q], cost: &CostMatrix) -> NetworkSolution<Q> {
    let m = supply.len();
    let n = demand.len();
    debug_assert_eq!((m, n), (cost.rows(), cost.cols()));
    let narcs = m * n;
    let nodes = m + n;
    let mut flow = vec![Q::ZERO; narcs];
    let mut basic = vec![false; narcs];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];

    let add_arc = |a: usize, basic: &mut [bool], adj: &mut [Vec<usize>]| {
        basic[a] = true;
        adj[a / n].push(a);
        adj[m + a % n].push(a);
    };

    // north-west corner
    {
        let mut s = supply.to_vec();
        let mut t = demand.to_vec();
        let (mut i, mut j) = (0, 0);
        loop {
            let q = if s[i] < t[j] { s[i] } else { t[j] };
            let q = if q < Q::ZERO { Q::ZERO } else { q };
            let a = i * n + j;
            flow[a] = q;
            add_arc(a, &mut basic, &mut adj);
            s[i] = s[i] - q;
            t[j] = t[j] - q;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || s[i] <= Q::ZERO {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let cmax = cost.max_abs();
    let tol = 1e-11 * cmax.max(1.0);
    let block = ((narcs as f64).sqrt() as usize).max(64).min(narcs.max(1));
    let max_pivots = 20 * narcs + 10 * nodes + 1000;
    let mut tree = Tree {
        parent: vec![usize::MAX; nodes],
        parent_arc: vec![usize::MAX; nodes],
        depth: vec![0; nodes],
        potential: vec![0.0; nodes],
        order: Vec::with_capacity(nodes),
    };
    let mut degenerate_run = 0usize;
    let mut next_block = 0usize;
    let mut pivots = 0usize;
    let mut converged = false;
    let mut path_dec: Vec<usize> = Vec::new();
    let mut path_inc: Vec<usize> = Vec::new();

    loop {
        build_tree(&mut tree, &adj, cost, m, n);
        let reduced = |a: usize| cost.get(a / n, a % n) - tree.potential[a / n] - tree.potential[m + a % n];

        let entering = if degenerate_run >= BLAND_AFTER {
            (0..narcs).find(|&a| !basic[a] && reduced(a) < -tol)
        } else {
            let mut found = None;
            let mut scanned = 0;
            let mut pos = next_block;
            while scanned < narcs {
                let mut best = -tol;
                let mut best_arc = None;
                let end = (scanned + block).min(narcs);
                while scanned < end {
                    let a = pos;
                    pos += 1;
                    if pos == narcs {
                        pos = 0;
                    }
                    scanned += 1;
                    if !basic[a] {
                        let r = reduced(a);
                        if r < best {
                            best = r;
                            best_arc = Some(a);
                        }
                    }
                }
                if best_arc.is_some() {
                    found = best_arc;
                    next_block = pos;
                    break;
                }
            }
            found
        };
        let Some(e) = entering else {
            converged = true;
            break;
        };
        if pivots >= max_pivots {
            break;
        }
        pivots += 1;

        // cycle: e forward, then from the sink of e up to the common ancestor
        // and down to the source of e
        path_dec.clear();
        path_inc.clear();
        let mut x = e / n; // source side
        let mut y = m + e % n; // sink side
        while x != y {
            if tree.depth[x] >= tree.depth[y] {
                // traversed parent -> child towards the source of e
                let a = tree.parent_arc[x];
                if x < m {
                    path_dec.push(a);
                } else {
                    path_inc.push(a);
                }
                x = tree.parent[x];
            } else {
                // traversed child -> parent away from the sink of e
                let a = tree.parent_arc[y];
                if y >= m {
                    path_dec.push(a);
                } else {
                    path_inc.push(a);
                }
                y = tree.parent[y];
            }
        }
        let mut theta = flow[path_dec[0]];
        let mut leave = path_dec[0];
        for &a in &path_dec[1..] {
            let f = flow[a];
            if f < theta || (f == theta && a < leave) {
                theta = f;
                leave = a;
            }
        }
        if theta.is_degenerate() {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
        for &a in &path_dec {
            flow[a] = flow[a] - theta;
        }
        for &a in &path_inc {
            flow[a] = flow[a] + theta;
        }
        flow[e] = theta;
        add_arc(e, &mut basic, &mut adj);
        basic[leave] = false;
        flow[leave] = Q::ZERO;
        for node in [leave / n, m + leave % n] {
            let list = &mut adj[node];
            let k = list.iter().position(|&a| a == leave).expect("leaving arc in tree");
            list.swap_remove(k);
        }
    }

    if !converged {
        build_tree(&mut tree, &adj, cost, m, n);
    }
    let mut basis: Vec<(usize, usize, Q)> = (0..narcs)
        .filter(|&a| basic[a])
        .map(|a| (a / n, a % n, flow[a]))
        .collect();
    basis.sort_by_key(|&(i, j, _)| (i, j));
    // summing in sorted order makes the objective independent of how the
    // problem was oriented (transposing it yields bit-identical values)
    let mut terms: Vec<f64> = basis
        .iter()
        .map(|&(i, j, q)| q.to_f64() * cost.get(i, j))
        .collect();
    terms.sort_by(f64::total_cmp);
    let objective = terms.iter().sum();
    NetworkSolution {
        basis,
        row_potentials: tree.potential[..m].to_vec(),
        col_potentials: tree.potential[m..].to_vec(),
        objective,
        converged,
    }
}

/// Roots the basis tree at source 0 and recomputes potentials with
/// `u_i + v_j = c_ij` on basic arcs.
fn build_tree(tree: &mut Tree, adj: &[Vec<usize>], cost: &CostMatrix, m: usize, n: usize) {
    tree.order.clear();
    tree.parent.fill(usize::MAX);
    tree.parent[0] = 0;
    tree.parent_arc[0] = usize::MAX;
    tree.depth[0] = 0;
    tree.potential[0] = 0.0;
    tree.order.push(0);
    let mut head = 0;
    while head < tree.order.len() {
        let v = tree.order[head];
        head += 1;
        for &a in &adj[v] {
            let (i, j) = (a / n, m + a % n);
            let w = if v == i { j } else { i };
            if tree.parent[w] != usize::MAX {
                continue;
            }
            tree.parent[w] = v;
            tree.parent_arc[w] = a;
            tree.depth[w] = tree.depth[v] + 1;
            tree.potential[w] = cost.get(a / n, a % n) - tree.potential[v];
            tree.order.push(w);
        }
    }
    debug_assert_eq!(tree.order.len(), m + n, "basis must span all nodes");
}
