//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Solves `min c.x  s.t.  A x = b, x >= 0` exactly enough for verification at
//! small scale. Used as the independent oracle for the transportation solver
//! and for the bicausal transport LP.

use crate::error::{Error, Result};

/// An equality-form linear program.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    n_vars: usize,
    cost: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

const PIVOT_EPS: f64 = 1e-9;

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            cost: vec![0.0; n_vars],
            ..Self::default()
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn set_cost(&mut self, var: usize, c: f64) {
        self.cost[var] = c;
    }

    /// Adds `sum coeff * x[var] = rhs`. Repeated variables accumulate.
    pub fn add_eq(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        debug_assert!(coeffs.iter().all(|(v, _)| *v < self.n_vars));
        self.rows.push(coeffs);
        self.rhs.push(rhs);
    }

    pub fn solve(&self) -> Result<LpSolution> {
        let v = self.n_vars;
        let r = self.rows.len();
        let w = v + r + 1;
        let mut tab = vec![0.0; r * w];
        let mut basis = vec![0usize; r];
        for (k, (row, &b)) in self.rows.iter().zip(&self.rhs).enumerate() {
            let sign = if b < 0.0 { -1.0 } else { 1.0 };
            let line = &mut tab[k * w..(k + 1) * w];
            for &(j, a) in row {
                line[j] += sign * a;
            }
            line[v + k] = 1.0;
            line[w - 1] = sign * b;
            basis[k] = v + k;
        }
        let scale_b = 1.0 + self.rhs.iter().map(|b| b.abs()).sum::<f64>();

        // phase 1: minimise the sum of artificials
        let mut obj = vec![0.0; w];
        for k in 0..r {
            for j in 0..v {
                obj[j] -= tab[k * w + j];
            }
            obj[w - 1] -= tab[k * w + w - 1];
        }
        let mut tableau = Tableau {
            tab,
            obj,
            basis,
            rows: r,
            width: w,
            n_vars: v,
            pivots: 0,
        };
        tableau.optimise(1e-11)?;
        if -tableau.obj[w - 1] > 1e-9 * scale_b {
            return Err(Error::Infeasible);
        }
        // pivot remaining artificials out where possible; rows where that is
        // impossible are redundant and stay inert
        for k in 0..r {
            if tableau.basis[k] >= v {
                let row = &tableau.tab[k * w..k * w + v];
                if let Some(j) = (0..v).find(|&j| row[j].abs() > PIVOT_EPS) {
                    tableau.pivot(k, j);
                }
            }
        }

        // phase 2
        let cmax = self.cost.iter().fold(1.0_f64, |m, c| m.max(c.abs()));
        let mut obj = vec![0.0; w];
        obj[..v].copy_from_slice(&self.cost);
        for k in 0..r {
            let b = tableau.basis[k];
            let cb = if b < v { self.cost[b] } else { 0.0 };
            if cb != 0.0 {
                for (o, t) in obj.iter_mut().zip(&tableau.tab[k * w..(k + 1) * w]) {
                    *o -= cb * t;
                }
            }
        }
        obj[v..w - 1].fill(0.0);
        tableau.obj = obj;
        tableau.optimise(1e-11 * cmax)?;

        let mut x = vec![0.0; v];
        for k in 0..r {
            let b = tableau.basis[k];
            if b < v {
                x[b] = tableau.tab[k * w + w - 1].max(0.0);
            }
        }
        let objective = x.iter().zip(&self.cost).map(|(a, c)| a * c).sum();
        Ok(LpSolution {
            x,
            objective,
            pivots: tableau.pivots,
        })
    }
}

struct Tableau {
    tab: Vec<f64>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    rows: usize,
    width: usize,
    n_vars: usize,
    pivots: usize,
}

impl Tableau {
    fn optimise(&mut self, tol: f64) -> Result<()> {
        let w = self.width;
        loop {
            // Bland: lowest-index improving column among structural variables
            let Some(col) = (0..self.n_vars).find(|&j| self.obj[j] < -tol) else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for k in 0..self.rows {
                let a = self.tab[k * w + col];
                if a > PIVOT_EPS {
                    let ratio = self.tab[k * w + w - 1] / a;
                    best = match best {
                        None => Some((k, ratio)),
                        Some((bk, br)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                            if (!tie && ratio < br) || (tie && self.basis[k] < self.basis[bk]) {
                                Some((k, ratio))
                            } else {
                                Some((bk, br))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = best else {
                return Err(Error::Unbounded);
            };
            self.pivot(row, col);
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        self.pivots += 1;
        let p = self.tab[row * w + col];
        let (before, rest) = self.tab.split_at_mut(row * w);
        let (prow, after) = rest.split_at_mut(w);
        prow.iter_mut().for_each(|a| *a /= p);
        prow[col] = 1.0;
        let eliminate = |line: &mut [f64]| {
            let f = line[col];
            if f != 0.0 {
                for (a, b) in line.iter_mut().zip(prow.iter()) {
                    *a -= f * b;
                }
                line[col] = 0.0;
            }
        };
        before.chunks_exact_mut(w).for_each(eliminate);
        after.chunks_exact_mut(w).for_each(eliminate);
        eliminate(&mut self.obj);
        self.basis[row] = col;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lp() {
        // min -x - y  s.t. x + 2y + s1 = 4, 3x + y + s2 = 6
        let mut lp = LinearProgram::new(4);
        lp.set_cost(0, -1.0);
        lp.set_cost(1, -1.0);
        lp.add_eq(vec![(0, 1.0), (1, 2.0), (2, 1.0)], 4.0);
        lp.add_eq(vec![(0, 3.0), (1, 1.0), (3, 1.0)], 6.0);
        let s = lp.solve().unwrap();
        assert!((s.objective + 2.8).abs() < 1e-12);
        assert!((s.x[0] - 1.6).abs() < 1e-12);
        assert!((s.x[1] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn redundant_rows_and_negative_rhs() {
        let mut lp = LinearProgram::new(2);
        lp.set_cost(0, 1.0);
        lp.set_cost(1, 2.0);
        lp.add_eq(vec![(0, 1.0), (1, 1.0)], 1.0);
        lp.add_eq(vec![(0, -2.0), (1, -2.0)], -2.0);
        let s = lp.solve().unwrap();
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.add_eq(vec![(0, 1.0)], -1.0);
        assert!(matches!(lp.solve(), Err(Error::Infeasible)));
        let mut lp = LinearProgram::new(2);
        lp.set_cost(0, -1.0);
        lp.add_eq(vec![(0, 1.0), (1, -1.0)], 0.0);
        assert!(matches!(lp.solve(), Err(Error::Unbounded)));
    }
}
