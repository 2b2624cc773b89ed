//! Linear relaxation of the restricted master problem
//!
//! ```text
//!   minimise  sum_h z_h
//!   s.t.      sum_h p_t^h z_h >= q_t     for every type t
//!             z >= 0
//! ```
//!
//! solved with a dense-inverse revised simplex on the standard form
//! `A z - s = q`. All structural costs are 1 and surplus costs 0, so the
//! all-surplus basis is dual feasible for any right-hand side: a cold solve is
//! a dual simplex run from that basis and needs no phase one. Appending a
//! column keeps the basis primal feasible (primal simplex resumes); appending
//! a row or changing a bound keeps it dual feasible (dual simplex resumes).
//!
//! Pricing is Dantzig's rule; after `3 * (rows + cols)` pivots in one call the
//! solver switches to Bland's rule. A call that exceeds `50 * (rows + cols)`
//! pivots fails with [`Error::NumericFailure`].

use crate::error::{Error, Result};
use crate::model::Pattern;

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;

/// Restricted master LP: pattern columns and real-valued demands.
#[derive(Debug, Clone, PartialEq)]
pub struct RmpLp {
    pub columns: Vec<Pattern>,
    pub demands: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    /// Column usage `z^h`, one per column.
    pub primal: Vec<f64>,
    /// Shadow prices `delta_t`, one per type row.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

/// Verification tolerance `1e-7 * max(1, sum q)`.
pub fn lp_tolerance(demands: &[f64]) -> f64 {
    1e-7 * demands.iter().sum::<f64>().max(1.0)
}

/// Solves the LP relaxation of the restricted master problem and returns
/// primal values, shadow prices and the objective.
pub fn solve_rmp_lp(problem: &RmpLp) -> Result<LpResult> {
    let rows = problem.demands.len();
    check_coverage(&problem.columns, &problem.demands)?;
    let mut lp = RevisedSimplex::new(problem.demands.clone());
    for col in &problem.columns {
        if col.counts().len() != rows {
            return Err(Error::InvalidParams(format!(
                "column has {} entries, expected {rows}",
                col.counts().len()
            )));
        }
        lp.push_pattern(col);
    }
    lp.optimize()?;
    Ok(lp.result(rows))
}

pub(crate) fn check_coverage(columns: &[Pattern], demands: &[f64]) -> Result<()> {
    for (t, &q) in demands.iter().enumerate() {
        if q < 0.0 || !q.is_finite() {
            return Err(Error::InvalidParams(format!("demand {t} is {q}")));
        }
        if q > 0.0 && !columns.iter().any(|c| c.counts().get(t).is_some_and(|&v| v > 0)) {
            return Err(Error::Infeasible { type_index: t });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Var {
    Col(usize),
    Surplus(usize),
}

/// Revised simplex over `A z - s = rhs` with unit structural costs.
#[derive(Debug, Clone)]
pub struct RevisedSimplex {
    rows: usize,
    rhs: Vec<f64>,
    /// Sparse structural columns as (row, coefficient).
    cols: Vec<Vec<(usize, f64)>>,
    basis: Vec<Var>,
    col_pos: Vec<Option<usize>>,
    surplus_pos: Vec<Option<usize>>,
    /// Row-major `rows x rows` basis inverse.
    binv: Vec<f64>,
    xb: Vec<f64>,
    since_refactor: usize,
    total_pivots: usize,
}

impl RevisedSimplex {
    /// Empty problem with the all-surplus starting basis.
    pub fn new(rhs: Vec<f64>) -> Self {
        let rows = rhs.len();
        let mut binv = vec![0.0; rows * rows];
        for i in 0..rows {
            binv[i * rows + i] = -1.0;
        }
        let xb = rhs.iter().map(|&b| -b).collect();
        RevisedSimplex {
            rows,
            rhs,
            cols: Vec::new(),
            basis: (0..rows).map(Var::Surplus).collect(),
            col_pos: Vec::new(),
            surplus_pos: (0..rows).map(Some).collect(),
            binv,
            xb,
            since_refactor: 0,
            total_pivots: 0,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.rows
    }

    pub fn num_cols(&self) -> usize {
        self.cols.len()
    }

    /// Nonzero entries of structural column `j` as (row, coefficient).
    pub fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.cols[j]
    }

    pub fn total_pivots(&self) -> usize {
        self.total_pivots
    }

    /// Appends a structural column (nonbasic at zero).
    pub fn push_column(&mut self, entries: Vec<(usize, f64)>) -> usize {
        debug_assert!(entries.iter().all(|&(r, _)| r < self.rows));
        self.cols.push(entries.into_iter().filter(|&(_, v)| v != 0.0).collect());
        self.col_pos.push(None);
        self.cols.len() - 1
    }

    /// Appends the column of a pattern, reading the first `counts.len()` rows.
    pub fn push_pattern(&mut self, pattern: &Pattern) -> usize {
        let entries = pattern
            .counts()
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c > 0)
            .map(|(t, &c)| (t, f64::from(c)))
            .collect();
        self.push_column(entries)
    }

    /// Appends the row `sum_j coeffs_j z_j >= rhs` with its surplus basic.
    pub fn add_row(&mut self, coeffs: &[(usize, f64)], rhs: f64) -> Result<()> {
        let r = self.rows;
        for &(j, v) in coeffs {
            if v != 0.0 {
                self.cols[j].push((r, v));
            }
        }
        self.rows += 1;
        self.rhs.push(rhs);
        self.surplus_pos.push(Some(self.basis.len()));
        self.basis.push(Var::Surplus(r));
        self.refactor()
    }

    /// Lower bound `z_j >= value`.
    pub fn add_lower_bound(&mut self, col: usize, value: f64) -> Result<()> {
        self.add_row(&[(col, 1.0)], value)
    }

    /// Upper bound `z_j <= value`, stored as `-z_j >= -value`.
    pub fn add_upper_bound(&mut self, col: usize, value: f64) -> Result<()> {
        self.add_row(&[(col, -1.0)], -value)
    }

    fn feas_tol(&self) -> f64 {
        1e-9 * self.rhs.iter().fold(1.0f64, |m, &b| m.max(b.abs()))
    }

    fn pivot_cap(&self) -> usize {
        50 * (self.rows + self.cols.len()).max(1)
    }

    fn bland_after(&self) -> usize {
        3 * (self.rows + self.cols.len())
    }

    /// Simplex multipliers `c_B^T B^-1`.
    pub fn multipliers(&self) -> Vec<f64> {
        let m = self.rows;
        let mut y = vec![0.0; m];
        for (k, var) in self.basis.iter().enumerate() {
            if let Var::Col(_) = var {
                let row = &self.binv[k * m..(k + 1) * m];
                for (yi, &b) in y.iter_mut().zip(row) {
                    *yi += b;
                }
            }
        }
        y
    }

    fn col_dot(&self, j: usize, y: &[f64]) -> f64 {
        self.cols[j].iter().map(|&(r, v)| y[r] * v).sum()
    }

    fn reduced_cost(&self, var: Var, y: &[f64]) -> f64 {
        match var {
            Var::Col(j) => 1.0 - self.col_dot(j, y),
            Var::Surplus(i) => y[i],
        }
    }

    fn is_basic(&self, var: Var) -> bool {
        match var {
            Var::Col(j) => self.col_pos[j].is_some(),
            Var::Surplus(i) => self.surplus_pos[i].is_some(),
        }
    }

    fn nonbasic(&self) -> impl Iterator<Item = Var> + '_ {
        (0..self.cols.len())
            .map(Var::Col)
            .chain((0..self.rows).map(Var::Surplus))
            .filter(|&v| !self.is_basic(v))
    }

    /// `B^-1 a` for the column of `var`.
    fn ftran(&self, var: Var) -> Vec<f64> {
        let m = self.rows;
        let mut u = vec![0.0; m];
        match var {
            Var::Col(j) => {
                for (i, ui) in u.iter_mut().enumerate() {
                    let row = &self.binv[i * m..(i + 1) * m];
                    *ui = self.cols[j].iter().map(|&(r, v)| row[r] * v).sum();
                }
            }
            Var::Surplus(s) => {
                for (i, ui) in u.iter_mut().enumerate() {
                    *ui = -self.binv[i * m + s];
                }
            }
        }
        u
    }

    fn set_pos(&mut self, var: Var, pos: Option<usize>) {
        match var {
            Var::Col(j) => self.col_pos[j] = pos,
            Var::Surplus(i) => self.surplus_pos[i] = pos,
        }
    }

    fn pivot(&mut self, r: usize, entering: Var, u: &[f64]) -> Result<()> {
        let m = self.rows;
        let pr = u[r];
        let theta = self.xb[r] / pr;
        for k in 0..m {
            self.binv[r * m + k] /= pr;
        }
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (pivot_row, after) = rest.split_at_mut(m);
        for (i, row) in before.chunks_exact_mut(m).enumerate() {
            let f = u[i];
            if f != 0.0 {
                row.iter_mut().zip(pivot_row.iter()).for_each(|(a, &b)| *a -= f * b);
            }
        }
        for (off, row) in after.chunks_exact_mut(m).enumerate() {
            let f = u[r + 1 + off];
            if f != 0.0 {
                row.iter_mut().zip(pivot_row.iter()).for_each(|(a, &b)| *a -= f * b);
            }
        }
        for (i, x) in self.xb.iter_mut().enumerate() {
            if i != r {
                *x -= u[i] * theta;
            }
        }
        self.xb[r] = theta;
        let leaving = self.basis[r];
        self.set_pos(leaving, None);
        self.set_pos(entering, Some(r));
        self.basis[r] = entering;
        self.total_pivots += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    /// Recomputes `B^-1` and the basic values from scratch.
    fn refactor(&mut self) -> Result<()> {
        let m = self.rows;
        let mut a = vec![0.0; m * m];
        for (k, &var) in self.basis.iter().enumerate() {
            match var {
                Var::Col(j) => {
                    for &(r, v) in &self.cols[j] {
                        a[r * m + k] = v;
                    }
                }
                Var::Surplus(i) => a[i * m + k] = -1.0,
            }
        }
        let inv = invert(&mut a, m).ok_or(Error::NumericFailure {
            pivots: self.total_pivots,
        })?;
        self.binv = inv;
        self.xb = (0..m)
            .map(|i| {
                let row = &self.binv[i * m..(i + 1) * m];
                row.iter().zip(&self.rhs).map(|(a, b)| a * b).sum()
            })
            .collect();
        self.since_refactor = 0;
        Ok(())
    }

    fn primal_infeasible(&self) -> bool {
        let tol = self.feas_tol();
        self.xb.iter().any(|&x| x < -tol)
    }

    fn dual_infeasible(&self) -> bool {
        let y = self.multipliers();
        self.nonbasic().any(|v| self.reduced_cost(v, &y) < -OPT_TOL)
    }

    /// Re-optimizes from the current basis.
    pub fn optimize(&mut self) -> Result<()> {
        for _ in 0..4 {
            let pinf = self.primal_infeasible();
            let dinf = self.dual_infeasible();
            match (pinf, dinf) {
                (false, false) => return Ok(()),
                (false, true) => self.primal_simplex()?,
                (true, false) => self.dual_simplex()?,
                (true, true) => {
                    self.reset_basis()?;
                    self.dual_simplex()?;
                }
            }
        }
        if self.primal_infeasible() || self.dual_infeasible() {
            return Err(Error::NumericFailure {
                pivots: self.total_pivots,
            });
        }
        Ok(())
    }

    fn reset_basis(&mut self) -> Result<()> {
        for p in self.col_pos.iter_mut() {
            *p = None;
        }
        self.basis = (0..self.rows).map(Var::Surplus).collect();
        self.surplus_pos = (0..self.rows).map(Some).collect();
        self.refactor()
    }

    fn primal_simplex(&mut self) -> Result<()> {
        let cap = self.pivot_cap();
        let bland_after = self.bland_after();
        let tol = self.feas_tol();
        for it in 0..=cap {
            let bland = it >= bland_after;
            let y = self.multipliers();
            let mut entering: Option<(Var, f64)> = None;
            for v in self.nonbasic() {
                let d = self.reduced_cost(v, &y);
                if d >= -OPT_TOL {
                    continue;
                }
                if bland {
                    entering = Some((v, d));
                    break;
                }
                if entering.is_none_or(|(_, best)| d < best) {
                    entering = Some((v, d));
                }
            }
            let Some((q, _)) = entering else {
                return Ok(());
            };
            if it == cap {
                break;
            }
            let u = self.ftran(q);
            let mut leave: Option<(usize, f64)> = None;
            for (i, &ui) in u.iter().enumerate() {
                if ui <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.xb[i].max(0.0) / ui;
                let better = match leave {
                    None => true,
                    Some((r, best)) => {
                        if ratio < best - tol {
                            true
                        } else if ratio <= best + tol {
                            if bland {
                                self.basis[i] < self.basis[r]
                            } else {
                                ui > u[r]
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((r, _)) = leave else {
                // Objective is bounded below by zero, so an unbounded ray
                // only appears through numerical trouble.
                return Err(Error::NumericFailure {
                    pivots: self.total_pivots,
                });
            };
            self.pivot(r, q, &u)?;
        }
        Err(Error::NumericFailure {
            pivots: self.total_pivots,
        })
    }

    fn dual_simplex(&mut self) -> Result<()> {
        let cap = self.pivot_cap();
        let bland_after = self.bland_after();
        let tol = self.feas_tol();
        let m = self.rows;
        for it in 0..=cap {
            let bland = it >= bland_after;
            let mut leave: Option<usize> = None;
            for (i, &x) in self.xb.iter().enumerate() {
                if x >= -tol {
                    continue;
                }
                leave = match leave {
                    None => Some(i),
                    Some(r) if bland && self.basis[i] < self.basis[r] => Some(i),
                    Some(r) if !bland && x < self.xb[r] => Some(i),
                    keep => keep,
                };
            }
            let Some(r) = leave else {
                return Ok(());
            };
            if it == cap {
                break;
            }
            let rho = self.binv[r * m..(r + 1) * m].to_vec();
            let y = self.multipliers();
            let mut entering: Option<(Var, f64, f64)> = None;
            for v in self.nonbasic() {
                let alpha = match v {
                    Var::Col(j) => self.cols[j].iter().map(|&(k, a)| rho[k] * a).sum(),
                    Var::Surplus(s) => -rho[s],
                };
                if alpha >= -PIVOT_TOL {
                    continue;
                }
                let d = self.reduced_cost(v, &y).max(0.0);
                let ratio = d / -alpha;
                let better = match entering {
                    None => true,
                    Some((w, best, best_alpha)) => {
                        if ratio < best - OPT_TOL {
                            true
                        } else if ratio <= best + OPT_TOL {
                            if bland {
                                v < w
                            } else {
                                alpha.abs() > best_alpha.abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    entering = Some((v, ratio, alpha));
                }
            }
            let Some((q, _, _)) = entering else {
                let type_index = match self.basis[r] {
                    Var::Surplus(i) => i,
                    Var::Col(_) => r,
                };
                return Err(Error::Infeasible { type_index });
            };
            let u = self.ftran(q);
            if u[r].abs() <= PIVOT_TOL {
                self.refactor()?;
                continue;
            }
            self.pivot(r, q, &u)?;
        }
        Err(Error::NumericFailure {
            pivots: self.total_pivots,
        })
    }

    /// Current values of the structural variables.
    pub fn primal(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.cols.len()];
        for (k, &var) in self.basis.iter().enumerate() {
            if let Var::Col(j) = var {
                z[j] = self.xb[k].max(0.0);
            }
        }
        z
    }

    pub fn objective(&self) -> f64 {
        self.primal().iter().sum()
    }

    /// Result restricted to the first `type_rows` rows (the demand rows).
    pub fn result(&self, type_rows: usize) -> LpResult {
        let primal = self.primal();
        let objective = primal.iter().sum();
        let duals = self.multipliers()[..type_rows]
            .iter()
            .map(|&d| d.max(0.0))
            .collect();
        LpResult {
            primal,
            duals,
            objective,
            pivots: self.total_pivots,
        }
    }
}

/// Gauss-Jordan inverse with partial pivoting; `a` is row-major `m x m` and
/// is destroyed.
fn invert(a: &mut [f64], m: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; m * m];
    for i in 0..m {
        inv[i * m + i] = 1.0;
    }
    for c in 0..m {
        let p = (c..m).max_by(|&x, &y| a[x * m + c].abs().total_cmp(&a[y * m + c].abs()))?;
        if a[p * m + c].abs() < 1e-12 {
            return None;
        }
        if p != c {
            for k in 0..m {
                a.swap(p * m + k, c * m + k);
                inv.swap(p * m + k, c * m + k);
            }
        }
        let d = a[c * m + c];
        for k in 0..m {
            a[c * m + k] /= d;
            inv[c * m + k] /= d;
        }
        for r in 0..m {
            if r == c {
                continue;
            }
            let f = a[r * m + c];
            if f == 0.0 {
                continue;
            }
            for k in 0..m {
                a[r * m + k] -= f * a[c * m + k];
                inv[r * m + k] -= f * inv[c * m + k];
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[u32]) -> Pattern {
        Pattern::new(c.to_vec())
    }

    #[test]
    fn diagonal_max_fill_columns() {
        let lp = RmpLp {
            columns: vec![p(&[2, 0, 0, 0]), p(&[0, 2, 0, 0]), p(&[0, 0, 3, 0]), p(&[0, 0, 0, 5])],
            demands: vec![1.0, 2.0, 1.0, 2.0],
        };
        let r = solve_rmp_lp(&lp).unwrap();
        let want_z = [0.5, 1.0, 1.0 / 3.0, 0.4];
        let want_d = [0.5, 0.5, 1.0 / 3.0, 0.2];
        for (a, b) in r.primal.iter().zip(want_z) {
            assert!((a - b).abs() < 1e-9, "{:?}", r.primal);
        }
        for (a, b) in r.duals.iter().zip(want_d) {
            assert!((a - b).abs() < 1e-9, "{:?}", r.duals);
        }
        assert!((r.objective - (0.5 + 1.0 + 1.0 / 3.0 + 0.4)).abs() < 1e-9);
    }

    #[test]
    fn one_variable() {
        let r = solve_rmp_lp(&RmpLp {
            columns: vec![p(&[3])],
            demands: vec![7.0],
        })
        .unwrap();
        assert!((r.primal[0] - 7.0 / 3.0).abs() < 1e-12);
        assert!((r.duals[0] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_demands() {
        let r = solve_rmp_lp(&RmpLp {
            columns: vec![p(&[1, 1]), p(&[2, 0])],
            demands: vec![0.0, 0.0],
        })
        .unwrap();
        assert_eq!(r.objective, 0.0);
        assert!(r.primal.iter().all(|&z| z == 0.0));
        assert!(r.duals.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn uncovered_type_is_infeasible() {
        let err = solve_rmp_lp(&RmpLp {
            columns: vec![p(&[1, 0])],
            demands: vec![1.0, 1.0],
        })
        .unwrap_err();
        assert!(matches!(err, Error::Infeasible { type_index: 1 }));
    }

    #[test]
    fn uncovered_zero_demand_is_fine() {
        let r = solve_rmp_lp(&RmpLp {
            columns: vec![p(&[2, 0])],
            demands: vec![3.0, 0.0],
        })
        .unwrap();
        assert!((r.objective - 1.5).abs() < 1e-12);
    }

    #[test]
    fn warm_start_matches_cold_solve() {
        let cols = [p(&[2, 0, 0, 0]), p(&[0, 2, 0, 0]), p(&[0, 0, 3, 0]), p(&[0, 0, 0, 5])];
        let demands = vec![1.0, 2.0, 1.0, 2.0];
        let mut warm = RevisedSimplex::new(demands.clone());
        for c in &cols {
            warm.push_pattern(c);
        }
        warm.optimize().unwrap();
        let extra = [p(&[1, 0, 1, 1]), p(&[0, 2, 0, 1]), p(&[0, 1, 2, 0])];
        for c in &extra {
            warm.push_pattern(c);
            warm.optimize().unwrap();
        }
        let mut all = cols.to_vec();
        all.extend(extra.iter().cloned());
        let cold = solve_rmp_lp(&RmpLp {
            columns: all,
            demands,
        })
        .unwrap();
        assert!((warm.objective() - cold.objective).abs() < 1e-9);
        // Table 1 case 1 relaxation reaches the size bound of 2 bins.
        assert!((cold.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn bound_rows_restrict_solution() {
        let mut lp = RevisedSimplex::new(vec![3.0]);
        lp.push_pattern(&p(&[2]));
        lp.optimize().unwrap();
        assert!((lp.objective() - 1.5).abs() < 1e-12);
        let mut up = lp.clone();
        up.add_lower_bound(0, 2.0).unwrap();
        up.optimize().unwrap();
        assert!((up.objective() - 2.0).abs() < 1e-12);
        let mut down = lp.clone();
        down.add_upper_bound(0, 1.0).unwrap();
        assert!(matches!(down.optimize(), Err(Error::Infeasible { .. })));
    }
}
