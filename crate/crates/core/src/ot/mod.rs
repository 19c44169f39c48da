//! Exact discrete optimal transport.
//!
//! Masses enter the solvers as integer counts. Two count vectors with sums `A`
//! and `B` are rescaled to the common total `lcm(A, B)`, so every flow the
//! network simplex produces is an integer and marginal constraints hold
//! exactly. When that total does not fit comfortably in an `i64` the solver
//! falls back to `f64` masses; such results carry `exact == false`.

pub mod lp;
mod network;

use num_integer::Integer;

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::paths::{euclidean_dist, pow_p};

/// Feasibility tolerance of the floating-point fallback.
pub const FALLBACK_TOLERANCE: f64 = 1e-9;

/// Largest common total handled on the integer path.
const MAX_EXACT_TOTAL: u128 = 1 << 52;

/// Dense row-major cost matrix with finite, nonnegative entries.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: (rows, cols),
                found: (data.len(), 1),
            });
        }
        if data.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidParameter(
                "costs must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// An optimal transport plan.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    /// Nonzero entries `(i, j, mass)`, masses summing to one.
    pub entries: Vec<(usize, usize, f64)>,
    /// Objective `sum mass * cost` (no root taken).
    pub cost: f64,
    /// Dual objective `sum_i a_i u_i + sum_j b_j v_j` from the final potentials.
    pub dual: f64,
    /// Whether the integer-supply path was used.
    pub exact: bool,
}

impl Coupling {
    pub fn row_sums(&self, rows: usize) -> Vec<f64> {
        let mut s = vec![0.0; rows];
        for &(i, _, q) in &self.entries {
            s[i] += q;
        }
        s
    }

    pub fn col_sums(&self, cols: usize) -> Vec<f64> {
        let mut s = vec![0.0; cols];
        for &(_, j, q) in &self.entries {
            s[j] += q;
        }
        s
    }
}

/// Common total of two count vectors, if the integer path can use it.
fn common_total(a_sum: u64, b_sum: u64) -> Option<u128> {
    let l = (a_sum as u128).lcm(&(b_sum as u128));
    (l <= MAX_EXACT_TOTAL).then_some(l)
}

/// Solves the transportation problem between masses `a / sum(a)` and
/// `b / sum(b)` under `cost`.
pub(crate) fn transport_counts(a: &[u64], b: &[u64], cost: &CostMatrix) -> Coupling {
    debug_assert_eq!((a.len(), b.len()), cost.shape());
    let a_sum: u64 = a.iter().sum();
    let b_sum: u64 = b.iter().sum();
    if let Some(total) = common_total(a_sum, b_sum) {
        let sa = (total / a_sum as u128) as i64;
        let sb = (total / b_sum as u128) as i64;
        let supply: Vec<i64> = a.iter().map(|&c| c as i64 * sa).collect();
        let demand: Vec<i64> = b.iter().map(|&c| c as i64 * sb).collect();
        let sol = network::solve(&supply, &demand, cost);
        let t = total as f64;
        finish(sol, &supply, &demand, t, true)
    } else {
        let supply: Vec<f64> = a.iter().map(|&c| c as f64 / a_sum as f64).collect();
        let demand: Vec<f64> = b.iter().map(|&c| c as f64 / b_sum as f64).collect();
        let sol = network::solve(&supply, &demand, cost);
        finish(sol, &supply, &demand, 1.0, false)
    }
}

fn finish<Q: network::Mass>(
    sol: network::NetworkSolution<Q>,
    supply: &[Q],
    demand: &[Q],
    total: f64,
    exact: bool,
) -> Coupling {
    let entries = sol
        .basis
        .iter()
        .filter(|(_, _, q)| q.to_f64() > 0.0)
        .map(|&(i, j, q)| (i, j, q.to_f64() / total))
        .collect();
    let dual = supply
        .iter()
        .zip(&sol.row_potentials)
        .map(|(s, u)| s.to_f64() * u)
        .chain(demand.iter().zip(&sol.col_potentials).map(|(d, v)| d.to_f64() * v))
        .sum::<f64>()
        / total;
    Coupling {
        entries,
        cost: sol.objective / total,
        dual,
        exact: exact && sol.converged,
    }
}

/// Monotone (quantile) coupling cost `sum |x - y|^p` between two measures on
/// the line given by ascending atoms and integer counts.
pub(crate) fn sweep_1d(xs: &[f64], a: &[u64], ys: &[f64], b: &[u64], p: f64) -> f64 {
    let a_sum: u64 = a.iter().sum();
    let b_sum: u64 = b.iter().sum();
    // lcm of two u64 values always fits in u128
    let total = (a_sum as u128).lcm(&(b_sum as u128));
    let sa = total / a_sum as u128;
    let sb = total / b_sum as u128;
    let (mut i, mut j) = (0, 0);
    let mut ra = a[0] as u128 * sa;
    let mut rb = b[0] as u128 * sb;
    let mut acc = 0.0;
    loop {
        let q = ra.min(rb);
        acc += q as f64 * pow_p((xs[i] - ys[j]).abs(), p);
        ra -= q;
        rb -= q;
        if ra == 0 {
            i += 1;
            if i == xs.len() {
                break;
            }
            ra = a[i] as u128 * sa;
        }
        if rb == 0 {
            j += 1;
            if j == ys.len() {
                break;
            }
            rb = b[j] as u128 * sb;
        }
    }
    acc / total as f64
}

fn check_same_dim(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    Ok(())
}

fn check_order(p: f64) -> Result<()> {
    if !p.is_finite() || p < 1.0 {
        return Err(Error::InvalidParameter(format!("order p must be >= 1, got {p}")));
    }
    Ok(())
}

/// `W_1` between two measures on the real line, `int_0^1 |F^-1 - G^-1|`,
/// by a sweep over the merged cumulative weights.
pub fn w1_exact_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    for m in [mu, nu] {
        if m.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: m.dim(),
            });
        }
    }
    let xs: Vec<f64> = mu.atoms().map(|a| a[0]).collect();
    let ys: Vec<f64> = nu.atoms().map(|a| a[0]).collect();
    Ok(sweep_1d(&xs, mu.counts(), &ys, nu.counts(), 1.0))
}

/// `|x_i - y_j|^p` for all atom pairs.
pub fn ground_cost(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> CostMatrix {
    let ys: Vec<&[f64]> = nu.atoms().collect();
    let mut data = Vec::with_capacity(mu.len() * nu.len());
    for x in mu.atoms() {
        for y in &ys {
            data.push(pow_p(euclidean_dist(x, y), p));
        }
    }
    CostMatrix {
        rows: mu.len(),
        cols: nu.len(),
        data,
    }
}

/// `W_p(mu, nu)` and an optimal basic plan.
pub fn wp_discrete(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<(f64, Coupling)> {
    check_same_dim(mu, nu)?;
    check_order(p)?;
    let cost = ground_cost(mu, nu, p);
    let plan = transport_counts(mu.counts(), nu.counts(), &cost);
    Ok((plan.cost.max(0.0).powf(1.0 / p), plan))
}

/// Optimal cost with `c(i, j) = |x_i - y_j|^p + vtg(i, j)`. Returns the
/// objective itself, without a `1/p` root.
pub fn wp_with_value_to_go(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
    vtg: &CostMatrix,
) -> Result<(f64, Coupling)> {
    check_same_dim(mu, nu)?;
    check_order(p)?;
    if vtg.shape() != (mu.len(), nu.len()) {
        return Err(Error::ShapeMismatch {
            expected: (mu.len(), nu.len()),
            found: vtg.shape(),
        });
    }
    let mut cost = ground_cost(mu, nu, p);
    for (c, v) in cost.data.iter_mut().zip(&vtg.data) {
        *c += v;
    }
    let plan = transport_counts(mu.counts(), nu.counts(), &cost);
    Ok((plan.cost, plan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    fn measure(dim: usize, atoms: &[&[f64]], counts: &[u64]) -> DiscreteMeasure {
        DiscreteMeasure::from_pairs(dim, atoms.iter().zip(counts).map(|(a, c)| (*a, *c))).unwrap()
    }

    /// Independent oracle: the transportation LP solved by the dense simplex.
    fn lp_oracle(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &CostMatrix) -> f64 {
        let (m, n) = (mu.len(), nu.len());
        let mut prog = lp::LinearProgram::new(m * n);
        for i in 0..m {
            for j in 0..n {
                prog.set_cost(i * n + j, cost.get(i, j));
            }
        }
        for i in 0..m {
            prog.add_eq((0..n).map(|j| (i * n + j, 1.0)).collect(), mu.weight(i));
        }
        for j in 0..n {
            prog.add_eq((0..m).map(|i| (i * n + j, 1.0)).collect(), nu.weight(j));
        }
        prog.solve().unwrap().objective
    }

    fn random_measure(rng: &mut SeededRng, dim: usize, k: usize) -> DiscreteMeasure {
        let pairs: Vec<(Vec<f64>, u64)> = (0..k)
            .map(|_| {
                let x: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
                (x, 1 + rng.next_u64() % 9)
            })
            .collect();
        DiscreteMeasure::from_pairs(dim, pairs).unwrap()
    }

    #[test]
    fn w1_1d_examples() {
        let a = measure(1, &[&[0.0], &[1.0]], &[1, 1]);
        assert_eq!(w1_exact_1d(&a, &a).unwrap(), 0.0);
        let d0 = DiscreteMeasure::dirac(&[0.0]).unwrap();
        let da = DiscreteMeasure::dirac(&[-2.5]).unwrap();
        assert_eq!(w1_exact_1d(&d0, &da).unwrap(), 2.5);
        // the only coupling of the 2x1 problem moves half a unit of mass by 1
        assert_eq!(w1_exact_1d(&a, &d0).unwrap(), 0.5);
        let two = DiscreteMeasure::dirac(&[0.0, 1.0]).unwrap();
        assert!(w1_exact_1d(&two, &two).is_err());
    }

    #[test]
    fn wp_examples() {
        let mut rng = SeededRng::new(1);
        let mu = random_measure(&mut rng, 2, 5);
        for p in [1.0, 2.0, 3.5] {
            let (v, plan) = wp_discrete(&mu, &mu, p).unwrap();
            assert_eq!(v, 0.0);
            assert!(plan.entries.iter().all(|&(i, j, _)| i == j));
            assert!(plan.exact);
        }
        let eps = 0.25;
        let d0 = DiscreteMeasure::dirac(&[0.0]).unwrap();
        let split = measure(1, &[&[eps], &[-eps]], &[1, 1]);
        assert_eq!(wp_discrete(&d0, &split, 1.0).unwrap().0, eps);
        assert!(wp_discrete(&d0, &DiscreteMeasure::dirac(&[0.0, 0.0]).unwrap(), 1.0).is_err());
        assert!(wp_discrete(&d0, &d0, 0.5).is_err());
    }

    #[test]
    fn value_to_go_examples() {
        let d0 = DiscreteMeasure::dirac(&[0.0]).unwrap();
        let one = CostMatrix::new(1, 1, vec![1.0]).unwrap();
        assert_eq!(wp_with_value_to_go(&d0, &d0, 1.0, &one).unwrap().0, 1.0);
        let mut rng = SeededRng::new(2);
        let mu = random_measure(&mut rng, 2, 4);
        let nu = random_measure(&mut rng, 2, 3);
        let zero = CostMatrix::zeros(4, 3);
        let (obj, _) = wp_with_value_to_go(&mu, &nu, 1.0, &zero).unwrap();
        assert_eq!(obj, wp_discrete(&mu, &nu, 1.0).unwrap().0);
        assert!(wp_with_value_to_go(&mu, &nu, 1.0, &CostMatrix::zeros(3, 4)).is_err());
        // 2x2 uniform marginals with a value-to-go that penalises the diagonal
        let u2 = measure(1, &[&[0.0], &[1.0]], &[1, 1]);
        let vtg = CostMatrix::new(2, 2, vec![3.0, 0.0, 0.0, 3.0]).unwrap();
        let (obj, plan) = wp_with_value_to_go(&u2, &u2, 1.0, &vtg).unwrap();
        let mut full = ground_cost(&u2, &u2, 1.0);
        full.data.iter_mut().zip(vtg.data()).for_each(|(c, v)| *c += v);
        assert!((obj - lp_oracle(&u2, &u2, &full)).abs() < 1e-12);
        assert_eq!(obj, 1.0);
        assert_eq!(plan.entries, vec![(0, 1, 0.5), (1, 0, 0.5)]);
    }

    #[test]
    fn transport_matches_lp_oracle() {
        let mut rng = SeededRng::new(77);
        for _ in 0..100 {
            let mu = random_measure(&mut rng, 2, 4);
            let nu = random_measure(&mut rng, 2, 3);
            let cost = ground_cost(&mu, &nu, 1.0);
            let (v, plan) = wp_discrete(&mu, &nu, 1.0).unwrap();
            assert!((v - lp_oracle(&mu, &nu, &cost)).abs() <= 1e-9);
            assert!(plan.entries.len() < mu.len() + nu.len());
        }
    }

    #[test]
    fn plans_are_feasible_and_dual_optimal() {
        let mut rng = SeededRng::new(5);
        for _ in 0..200 {
            let m = 1 + (rng.next_u64() % 12) as usize;
            let n = 1 + (rng.next_u64() % 12) as usize;
            let mu = random_measure(&mut rng, 3, m);
            let nu = random_measure(&mut rng, 3, n);
            let (_, plan) = wp_discrete(&mu, &nu, 2.0).unwrap();
            assert!(plan.exact);
            for (s, w) in plan.row_sums(mu.len()).iter().zip(mu.weights()) {
                assert!((s - w).abs() <= 1e-12);
            }
            for (s, w) in plan.col_sums(nu.len()).iter().zip(nu.weights()) {
                assert!((s - w).abs() <= 1e-12);
            }
            assert!(plan.entries.iter().all(|e| e.2 > 0.0));
            assert!((plan.cost - plan.dual).abs() <= 1e-9 * (1.0 + plan.cost));
        }
    }

    #[test]
    fn fallback_path_is_flagged_and_feasible() {
        // coprime totals near 2^31 force lcm beyond the exact range
        let a = [1u64 << 31, 1];
        let b = [(1u64 << 31) - 2, 1, 0x3];
        let cost = CostMatrix::from_fn(2, 3, |i, j| (i as f64 - j as f64).abs());
        let plan = transport_counts(&a, &b, &cost);
        assert!(!plan.exact);
        let asum: u64 = a.iter().sum();
        let bsum: u64 = b.iter().sum();
        for (s, c) in plan.row_sums(2).iter().zip(a) {
            assert!((s - c as f64 / asum as f64).abs() <= FALLBACK_TOLERANCE);
        }
        for (s, c) in plan.col_sums(3).iter().zip(b) {
            assert!((s - c as f64 / bsum as f64).abs() <= FALLBACK_TOLERANCE);
        }
    }

    #[test]
    fn sweep_agrees_with_simplex_on_the_line() {
        let mut rng = SeededRng::new(6);
        for _ in 0..500 {
            let (k, l) = (1 + (rng.next_u64() % 8) as usize, 1 + (rng.next_u64() % 8) as usize);
            let mu = random_measure(&mut rng, 1, k);
            let nu = random_measure(&mut rng, 1, l);
            for p in [1.0, 2.0] {
                let xs: Vec<f64> = mu.atoms().map(|a| a[0]).collect();
                let ys: Vec<f64> = nu.atoms().map(|a| a[0]).collect();
                let s = sweep_1d(&xs, mu.counts(), &ys, nu.counts(), p);
                let (_, plan) = wp_discrete(&mu, &nu, p).unwrap();
                assert!((s - plan.cost).abs() <= 1e-10, "p={p}: {s} vs {}", plan.cost);
            }
        }
    }

    proptest! {
        #[test]
        fn wp_is_a_metric(seed in any::<u64>(), p in prop_oneof![Just(1.0), Just(2.0)]) {
            let mut rng = SeededRng::new(seed);
            let a = random_measure(&mut rng, 2, 1 + (seed % 5) as usize);
            let b = random_measure(&mut rng, 2, 1 + (seed / 7 % 5) as usize);
            let c = random_measure(&mut rng, 2, 1 + (seed / 49 % 5) as usize);
            let ab = wp_discrete(&a, &b, p).unwrap().0;
            let ba = wp_discrete(&b, &a, p).unwrap().0;
            let bc = wp_discrete(&b, &c, p).unwrap().0;
            let ac = wp_discrete(&a, &c, p).unwrap().0;
            prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
            prop_assert!(ac <= ab + bc + 1e-9);
            prop_assert!(ab >= 0.0);
        }
    }
}
