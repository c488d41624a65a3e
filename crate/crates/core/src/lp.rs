//! Linear-programming relaxations.
//!
//! The branch-and-cut engine talks to an [`LpBackend`]. The bundled backend is
//! a bounded dual simplex with an explicit dense basis inverse, sized for the
//! few hundred rows and columns of desk-scale models. Adding rows and changing
//! column bounds keep the current basis dual feasible, so re-solves after
//! branching or cutting start warm.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// `Σ coeffs · x  (sense)  rhs`, with column indices into the LP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinearRow {
    pub fn new(coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        LinearRow { coeffs, sense, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

/// A maximization LP with column bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<LinearRow>,
}

impl LpProblem {
    pub fn num_cols(&self) -> usize {
        self.objective.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Maximization objective; `-inf` when infeasible.
    pub objective: f64,
    /// Column values of an optimal basic solution; empty when infeasible.
    pub values: Vec<f64>,
    pub iterations: usize,
}

/// What the branch-and-cut engine needs from an LP solver.
pub trait LpBackend {
    fn num_cols(&self) -> usize;
    fn num_rows(&self) -> usize;
    fn add_rows(&mut self, rows: &[LinearRow]) -> Result<()>;
    /// Column bounds; lower bounds must be finite.
    fn set_bounds(&mut self, col: usize, lower: f64, upper: f64) -> Result<()>;
    fn bounds(&self, col: usize) -> (f64, f64);
    /// Proven-optimal basic solution, or an infeasibility verdict.
    fn solve(&mut self) -> Result<LpSolution>;
}

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-7;
const REFACTOR_EVERY: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Basic(usize),
    AtLower,
    AtUpper,
}

/// Bounded dual simplex over `A x - s = 0`, where each row activity `s` is a
/// logical column carrying the row's bounds.
#[derive(Clone, Debug)]
pub struct DualSimplex {
    n: usize,
    objective: Vec<f64>,
    /// Minimization costs of structural and logical columns.
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Structural columns as `(row, coefficient)`.
    cols: Vec<Vec<(usize, f64)>>,
    binv: Vec<Vec<f64>>,
    basis: Vec<usize>,
    status: Vec<Status>,
    x: Vec<f64>,
    d: Vec<f64>,
    pivots_since_refactor: usize,
    /// Pivots happened since primal and dual values were last recomputed.
    dirty: bool,
    max_iterations: usize,
}

impl DualSimplex {
    pub fn new(problem: &LpProblem) -> Result<Self> {
        let n = problem.num_cols();
        if problem.lower.len() != n || problem.upper.len() != n {
            return Err(Error::Lp("bound vectors do not match the objective length".into()));
        }
        let mut lp = DualSimplex {
            n,
            objective: problem.objective.clone(),
            cost: problem.objective.iter().map(|c| -c).collect(),
            lower: problem.lower.clone(),
            upper: problem.upper.clone(),
            cols: vec![Vec::new(); n],
            binv: Vec::new(),
            basis: Vec::new(),
            status: Vec::with_capacity(n),
            x: Vec::with_capacity(n),
            d: Vec::with_capacity(n),
            pivots_since_refactor: 0,
            dirty: false,
            max_iterations: 50_000,
        };
        for j in 0..n {
            lp.check_bounds(j, lp.lower[j], lp.upper[j])?;
            let at_upper = lp.cost[j] < 0.0;
            if at_upper && lp.upper[j].is_infinite() {
                return Err(Error::Lp(format!("column {j} is unbounded in the improving direction")));
            }
            lp.status.push(if at_upper { Status::AtUpper } else { Status::AtLower });
            lp.x.push(if at_upper { lp.upper[j] } else { lp.lower[j] });
            lp.d.push(lp.cost[j]);
        }
        lp.add_rows(&problem.rows)?;
        Ok(lp)
    }

    pub fn with_iteration_limit(mut self, limit: usize) -> Self {
        self.max_iterations = limit;
        self
    }

    fn check_bounds(&self, j: usize, lower: f64, upper: f64) -> Result<()> {
        if !lower.is_finite() || upper.is_nan() || lower > upper {
            return Err(Error::Lp(format!("column {j} has invalid bounds [{lower}, {upper}]")));
        }
        Ok(())
    }

    fn m(&self) -> usize {
        self.basis.len()
    }

    /// `B^{-1}`-free access to a column of `[A | -I]`.
    fn for_column(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for &(i, a) in &self.cols[j] {
                f(i, a);
            }
        } else {
            f(j - self.n, -1.0);
        }
    }

    fn value_at_status(&self, j: usize) -> f64 {
        match self.status[j] {
            Status::AtUpper => self.upper[j],
            _ => self.lower[j],
        }
    }

    fn recompute_primal(&mut self) {
        let m = self.m();
        let mut v = vec![0.0; m];
        for j in 0..self.status.len() {
            if matches!(self.status[j], Status::Basic(_)) {
                continue;
            }
            let xj = self.value_at_status(j);
            self.x[j] = xj;
            if xj != 0.0 {
                self.for_column(j, |i, a| v[i] += a * xj);
            }
        }
        for r in 0..m {
            let val: f64 = -self.binv[r].iter().zip(&v).map(|(b, vi)| b * vi).sum::<f64>();
            self.x[self.basis[r]] = val;
        }
    }

    fn recompute_dual(&mut self) {
        let m = self.m();
        let mut y = vec![0.0; m];
        for r in 0..m {
            let cb = self.cost[self.basis[r]];
            if cb != 0.0 {
                for (yi, b) in y.iter_mut().zip(&self.binv[r]) {
                    *yi += cb * b;
                }
            }
        }
        for j in 0..self.status.len() {
            if matches!(self.status[j], Status::Basic(_)) {
                self.d[j] = 0.0;
                continue;
            }
            let mut dj = self.cost[j];
            self.for_column(j, |i, a| dj -= y[i] * a);
            self.d[j] = dj;
        }
    }

    /// Moves nonbasic boxed columns to the bound their reduced cost favours.
    fn restore_dual_feasibility(&mut self) -> Result<bool> {
        let mut moved = false;
        for j in 0..self.status.len() {
            let want = match self.status[j] {
                Status::Basic(_) => continue,
                _ if self.lower[j] == self.upper[j] => Status::AtLower,
                _ if self.d[j] < -DUAL_TOL => Status::AtUpper,
                _ if self.d[j] > DUAL_TOL => Status::AtLower,
                s => s,
            };
            let bound = if want == Status::AtUpper { self.upper[j] } else { self.lower[j] };
            if bound.is_infinite() {
                if self.d[j].abs() > 1e-7 {
                    return Err(Error::Lp(format!("column {j} lost dual feasibility towards an infinite bound")));
                }
                continue;
            }
            if want != self.status[j] {
                self.status[j] = want;
                moved = true;
            }
        }
        Ok(moved)
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m();
        let mut mat = vec![vec![0.0; 2 * m]; m];
        for r in 0..m {
            let col = self.basis[r];
            self.for_column(col, |i, a| mat[i][r] = a);
            mat[r][m + r] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&a, &b| mat[a][c].abs().total_cmp(&mat[b][c].abs()))
                .expect("nonempty range");
            if mat[p][c].abs() < 1e-12 {
                return Err(Error::Lp("basis matrix became singular".into()));
            }
            mat.swap(p, c);
            let inv = 1.0 / mat[c][c];
            for v in mat[c].iter_mut() {
                *v *= inv;
            }
            let pivot_row = mat[c].clone();
            for (r, row) in mat.iter_mut().enumerate() {
                if r == c {
                    continue;
                }
                let f = row[c];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
        // Row r of the inverse corresponds to basis position r.
        self.binv = mat.into_iter().map(|row| row[m..].to_vec()).collect();
        self.pivots_since_refactor = 0;
        Ok(())
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        let lo = self.lower[j];
        let hi = self.upper[j];
        if v < lo - PRIMAL_TOL * (1.0 + lo.abs()) {
            lo - v
        } else if v > hi + PRIMAL_TOL * (1.0 + hi.abs()) {
            v - hi
        } else {
            0.0
        }
    }

    fn run(&mut self) -> Result<(LpStatus, usize)> {
        self.recompute_dual();
        self.restore_dual_feasibility()?;
        self.recompute_primal();
        let bland_after = 20 * (self.status.len() + 10);
        let mut iterations = 0usize;
        loop {
            let bland = iterations >= bland_after;
            // Leaving row: largest violation, or lowest column index in Bland mode.
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m() {
                let inf = self.infeasibility(self.basis[r]);
                if inf > 0.0 {
                    let better = match leave {
                        None => true,
                        Some((lr, li)) => {
                            if bland {
                                self.basis[r] < self.basis[lr]
                            } else {
                                inf > li
                            }
                        }
                    };
                    if better {
                        leave = Some((r, inf));
                    }
                }
            }
            let Some((r, _)) = leave else {
                if self.dirty {
                    self.fresh_start()?;
                    continue;
                }
                if self.restore_dual_feasibility()? {
                    self.recompute_primal();
                    continue;
                }
                return Ok((LpStatus::Optimal, iterations));
            };
            if iterations >= self.max_iterations {
                return Err(Error::Lp(format!("iteration limit {} reached", self.max_iterations)));
            }
            iterations += 1;

            let p = self.basis[r];
            let below = self.x[p] < self.lower[p];
            let target = if below { self.lower[p] } else { self.upper[p] };
            let rho = self.binv[r].clone();

            // Candidate entering columns with their pivot-row entries.
            let mut alpha_row: Vec<(usize, f64)> = Vec::new();
            let mut cands: Vec<(usize, f64)> = Vec::new();
            for j in 0..self.status.len() {
                let st = self.status[j];
                if matches!(st, Status::Basic(_)) {
                    continue;
                }
                let mut a = 0.0;
                self.for_column(j, |i, v| a += rho[i] * v);
                if a == 0.0 {
                    continue;
                }
                alpha_row.push((j, a));
                if a.abs() <= PIVOT_TOL || self.lower[j] == self.upper[j] {
                    continue;
                }
                let eligible = match (below, st) {
                    (true, Status::AtLower) => a < 0.0,
                    (true, Status::AtUpper) => a > 0.0,
                    (false, Status::AtLower) => a > 0.0,
                    (false, Status::AtUpper) => a < 0.0,
                    _ => false,
                };
                if eligible {
                    cands.push((j, a));
                }
            }
            if cands.is_empty() {
                // Only trust an infeasibility ray from an accurate inverse row.
                if self.pivots_since_refactor > 0 && self.row_residual(r) > 1e-9 {
                    self.refactor()?;
                    self.fresh_start()?;
                    continue;
                }
                return Ok((LpStatus::Infeasible, iterations));
            }
            let (q, alpha_rq) = if bland {
                let mut best = cands[0];
                let mut best_ratio = f64::INFINITY;
                for &(j, a) in &cands {
                    let ratio = self.d[j].abs() / a.abs();
                    if ratio < best_ratio - 1e-12 || (ratio <= best_ratio + 1e-12 && j < best.0) {
                        best_ratio = ratio.min(best_ratio);
                        best = (j, a);
                    }
                }
                best
            } else {
                // Smallest ratio; near-ties go to the largest pivot.
                let ratio = |&(j, a): &(usize, f64)| self.d[j].abs() / a.abs();
                let min_ratio = cands.iter().map(ratio).fold(f64::INFINITY, f64::min);
                *cands
                    .iter()
                    .filter(|c| ratio(c) <= min_ratio + 1e-12 * (1.0 + min_ratio))
                    .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()).then(y.0.cmp(&x.0)))
                    .expect("the minimizer passes its own bound")
            };

            // Pivot column B^{-1} a_q.
            let m = self.m();
            let mut alpha_q = vec![0.0; m];
            self.for_column(q, |i, a| {
                for (row, out) in self.binv.iter().zip(alpha_q.iter_mut()) {
                    *out += row[i] * a;
                }
            });
            if (alpha_q[r] - alpha_rq).abs() > 1e-7 * (1.0 + alpha_rq.abs()) {
                if self.pivots_since_refactor == 0 {
                    return Err(Error::Lp("pivot row and column disagree on a fresh inverse".into()));
                }
                self.fresh_start()?;
                continue;
            }

            let theta_p = (self.x[p] - target) / alpha_rq;
            for (row, a) in alpha_q.iter().enumerate() {
                let b = self.basis[row];
                self.x[b] -= theta_p * a;
            }
            self.x[q] += theta_p;
            self.x[p] = target;

            let theta_d = self.d[q] / alpha_rq;
            if theta_d != 0.0 {
                for &(j, a) in &alpha_row {
                    self.d[j] -= theta_d * a;
                }
            }
            self.d[q] = 0.0;
            self.d[p] = -theta_d;

            let pivot = alpha_q[r];
            let pivot_row: Vec<f64> = self.binv[r].iter().map(|v| v / pivot).collect();
            for (row, &a) in self.binv.iter_mut().zip(&alpha_q) {
                if a != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= a * pv;
                    }
                }
            }
            self.binv[r] = pivot_row;

            self.status[p] = if below { Status::AtLower } else { Status::AtUpper };
            self.status[q] = Status::Basic(r);
            self.basis[r] = q;

            self.pivots_since_refactor += 1;
            self.dirty = true;
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                self.fresh_start()?;
            }
        }
    }

    /// All logical columns basic, structural columns at the bound their cost
    /// favours. Dual feasible whenever every improving column has a finite
    /// upper bound.
    fn reset_to_slack_basis(&mut self) -> Result<()> {
        let m = self.m();
        for j in 0..self.n {
            let at_upper = self.cost[j] < 0.0;
            if at_upper && self.upper[j].is_infinite() {
                return Err(Error::Lp(format!("column {j} is unbounded in the improving direction")));
            }
            self.status[j] = if at_upper { Status::AtUpper } else { Status::AtLower };
        }
        for r in 0..m {
            self.status[self.n + r] = Status::Basic(r);
            self.basis[r] = self.n + r;
        }
        self.binv = (0..m)
            .map(|r| {
                let mut row = vec![0.0; m];
                row[r] = -1.0;
                row
            })
            .collect();
        self.pivots_since_refactor = 0;
        self.dirty = false;
        Ok(())
    }

    /// Largest residual of `A x - s = 0` at the current values.
    fn primal_residual(&self) -> f64 {
        let mut act = vec![0.0; self.m()];
        for j in 0..self.n {
            for &(i, a) in &self.cols[j] {
                act[i] += a * self.x[j];
            }
        }
        act.iter()
            .enumerate()
            .map(|(i, v)| (v - self.x[self.n + i]).abs() / (1.0 + v.abs()))
            .fold(0.0, f64::max)
    }

    /// Largest entry of row `r` of `B^{-1} B - I`.
    fn row_residual(&self, r: usize) -> f64 {
        let rho = &self.binv[r];
        (0..self.m())
            .map(|c| {
                let mut v = if c == r { -1.0 } else { 0.0 };
                self.for_column(self.basis[c], |i, a| v += rho[i] * a);
                v.abs()
            })
            .fold(0.0, f64::max)
    }

    /// Recomputes primal and dual values from the current inverse, and from a
    /// fresh factorization when they do not reproduce the row activities.
    fn fresh_start(&mut self) -> Result<()> {
        self.recompute_dual();
        self.restore_dual_feasibility()?;
        self.recompute_primal();
        if self.primal_residual() > 1e-9 {
            self.refactor()?;
            self.recompute_dual();
            self.restore_dual_feasibility()?;
            self.recompute_primal();
        }
        self.dirty = false;
        Ok(())
    }
}

impl LpBackend for DualSimplex {
    fn num_cols(&self) -> usize {
        self.n
    }

    fn num_rows(&self) -> usize {
        self.m()
    }

    fn add_rows(&mut self, rows: &[LinearRow]) -> Result<()> {
        for row in rows {
            let i = self.m();
            let mut dense_coef: Vec<(usize, f64)> = Vec::with_capacity(row.coeffs.len());
            for &(j, a) in &row.coeffs {
                if j >= self.n {
                    return Err(Error::Lp(format!("row references column {j} of {}", self.n)));
                }
                if a != 0.0 {
                    self.cols[j].push((i, a));
                    dense_coef.push((j, a));
                }
            }
            // New inverse row: r_B B^{-1} in the old block, -1 on the new slack.
            let mut new_row = vec![0.0; i + 1];
            for &(j, a) in &dense_coef {
                if let Status::Basic(pos) = self.status[j] {
                    for (v, b) in new_row.iter_mut().zip(&self.binv[pos]) {
                        *v += a * b;
                    }
                }
            }
            new_row[i] = -1.0;
            for r in self.binv.iter_mut() {
                r.push(0.0);
            }
            self.binv.push(new_row);

            let (lo, hi) = match row.sense {
                Sense::Le => (f64::NEG_INFINITY, row.rhs),
                Sense::Ge => (row.rhs, f64::INFINITY),
                Sense::Eq => (row.rhs, row.rhs),
            };
            self.lower.push(lo);
            self.upper.push(hi);
            self.cost.push(0.0);
            self.status.push(Status::Basic(i));
            self.basis.push(self.n + i);
            self.x.push(row.activity(&self.x[..self.n]));
            self.d.push(0.0);
        }
        Ok(())
    }

    fn set_bounds(&mut self, col: usize, lower: f64, upper: f64) -> Result<()> {
        if col >= self.n {
            return Err(Error::Lp(format!("column {col} out of range")));
        }
        self.check_bounds(col, lower, upper)?;
        self.lower[col] = lower;
        self.upper[col] = upper;
        Ok(())
    }

    fn bounds(&self, col: usize) -> (f64, f64) {
        (self.lower[col], self.upper[col])
    }

    fn solve(&mut self) -> Result<LpSolution> {
        let (status, iterations) = match self.run() {
            Ok(done) => done,
            Err(err) => {
                log::debug!("warm solve failed ({err}); restarting from the slack basis");
                self.reset_to_slack_basis()?;
                self.run()?
            }
        };
        Ok(match status {
            LpStatus::Optimal => {
                let values: Vec<f64> = (0..self.n)
                    .map(|j| self.x[j].clamp(self.lower[j], self.upper[j]))
                    .collect();
                let objective = values.iter().zip(&self.objective).map(|(v, c)| v * c).sum();
                LpSolution {
                    status,
                    objective,
                    values,
                    iterations,
                }
            }
            LpStatus::Infeasible => LpSolution {
                status,
                objective: f64::NEG_INFINITY,
                values: Vec::new(),
                iterations,
            },
        })
    }
}

/// Solves a standalone LP from scratch.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    DualSimplex::new(problem)?.solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use itertools::Itertools;
    use proptest::prelude::*;

    fn row(coeffs: &[(usize, f64)], sense: Sense, rhs: f64) -> LinearRow {
        LinearRow::new(coeffs.to_vec(), sense, rhs)
    }

    #[test]
    fn textbook_example() {
        // max 3x + 2y, x + y <= 4, x + 3y <= 6, x <= 3.
        let p = LpProblem {
            objective: vec![3.0, 2.0],
            lower: vec![0.0, 0.0],
            upper: vec![3.0, f64::INFINITY],
            rows: vec![
                row(&[(0, 1.0), (1, 1.0)], Sense::Le, 4.0),
                row(&[(0, 1.0), (1, 3.0)], Sense::Le, 6.0),
            ],
        };
        // y is unbounded above with positive profit; the constructor rejects it.
        assert!(DualSimplex::new(&p).is_err());
        let p = LpProblem {
            upper: vec![3.0, 10.0],
            ..p
        };
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 11.0).abs() < 1e-9);
        assert!((s.values[0] - 3.0).abs() < 1e-9 && (s.values[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasibility() {
        let p = LpProblem {
            objective: vec![1.0, 1.0],
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
            rows: vec![row(&[(0, 1.0), (1, 1.0)], Sense::Ge, 3.0)],
        };
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn equality_and_ge_rows() {
        // max x - y, x + y = 1, y >= 0.25.
        let p = LpProblem {
            objective: vec![1.0, -1.0],
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
            rows: vec![
                row(&[(0, 1.0), (1, 1.0)], Sense::Eq, 1.0),
                row(&[(1, 1.0)], Sense::Ge, 0.25),
            ],
        };
        let s = solve_lp(&p).unwrap();
        assert!((s.objective - 0.5).abs() < 1e-9);
    }

    #[test]
    fn warm_updates() {
        let p = LpProblem {
            objective: vec![1.0, 1.0, 1.0],
            lower: vec![0.0; 3],
            upper: vec![1.0; 3],
            rows: vec![row(&[(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Le, 2.5)],
        };
        let mut lp = DualSimplex::new(&p).unwrap();
        let first = lp.solve().unwrap().objective;
        assert!((first - 2.5).abs() < 1e-9);
        assert!((lp.solve().unwrap().objective - first).abs() < 1e-7);
        lp.add_rows(&[row(&[(0, 1.0), (1, 1.0)], Sense::Le, 1.0)]).unwrap();
        assert!((lp.solve().unwrap().objective - 2.0).abs() < 1e-9);
        lp.set_bounds(2, 0.0, 0.0).unwrap();
        assert!((lp.solve().unwrap().objective - 1.0).abs() < 1e-9);
        lp.set_bounds(2, 0.0, 1.0).unwrap();
        lp.set_bounds(0, 1.0, 1.0).unwrap();
        let s = lp.solve().unwrap();
        assert!((s.objective - 2.0).abs() < 1e-9);
        assert!((s.values[0] - 1.0).abs() < 1e-9 && s.values[1].abs() < 1e-9);
        assert!(lp.set_bounds(0, f64::NEG_INFINITY, 1.0).is_err());
    }

    /// Best objective over all vertices of a bounded polytope, by solving every
    /// square subsystem of tight constraints.
    fn vertex_enumeration(p: &LpProblem) -> Option<f64> {
        let n = p.num_cols();
        let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
        for r in &p.rows {
            let mut a = vec![0.0; n];
            for &(j, v) in &r.coeffs {
                a[j] += v;
            }
            planes.push((a, r.rhs));
        }
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            planes.push((e.clone(), p.lower[j]));
            planes.push((e, p.upper[j]));
        }
        let mut best: Option<f64> = None;
        for combo in (0..planes.len()).combinations(n) {
            let mut m: Vec<Vec<f64>> = combo
                .iter()
                .map(|&k| {
                    let mut r = planes[k].0.clone();
                    r.push(planes[k].1);
                    r
                })
                .collect();
            let mut ok = true;
            for c in 0..n {
                let piv = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap();
                if m[piv][c].abs() < 1e-9 {
                    ok = false;
                    break;
                }
                m.swap(piv, c);
                for r in 0..n {
                    if r != c {
                        let f = m[r][c] / m[c][c];
                        for k in c..=n {
                            m[r][k] -= f * m[c][k];
                        }
                    }
                }
            }
            if !ok {
                continue;
            }
            let x: Vec<f64> = (0..n).map(|i| m[i][n] / m[i][i]).collect();
            let feasible = (0..n).all(|j| x[j] >= p.lower[j] - 1e-7 && x[j] <= p.upper[j] + 1e-7)
                && p.rows.iter().all(|r| r.violation(&x) <= 1e-7);
            if feasible {
                let v: f64 = x.iter().zip(&p.objective).map(|(a, b)| a * b).sum();
                if best.is_none_or(|b| v > b) {
                    best = Some(v);
                }
            }
        }
        best
    }

    fn random_lp() -> impl Strategy<Value = LpProblem> {
        (2usize..5, 1usize..5).prop_flat_map(|(n, m)| {
            let sense = prop_oneof![Just(Sense::Le), Just(Sense::Ge), Just(Sense::Eq)];
            (
                prop::collection::vec(-5i32..=5, n),
                prop::collection::vec(1i32..=3, n),
                prop::collection::vec((prop::collection::vec(-3i32..=3, n), sense, -4i32..=6), m),
            )
                .prop_map(move |(obj, ub, rows)| LpProblem {
                    objective: obj.iter().map(|&v| v as f64).collect(),
                    lower: vec![0.0; n],
                    upper: ub.iter().map(|&v| v as f64).collect(),
                    rows: rows
                        .into_iter()
                        .map(|(a, s, b)| LinearRow::new(a.iter().enumerate().map(|(j, &v)| (j, v as f64)).collect(), s, b as f64))
                        .collect(),
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn agrees_with_vertex_enumeration(p in random_lp()) {
            let s = solve_lp(&p).unwrap();
            match vertex_enumeration(&p) {
                None => prop_assert_eq!(s.status, LpStatus::Infeasible),
                Some(v) => {
                    prop_assert_eq!(s.status, LpStatus::Optimal);
                    prop_assert!((s.objective - v).abs() < 1e-6, "simplex {} vs vertices {}", s.objective, v);
                    for r in &p.rows {
                        prop_assert!(r.violation(&s.values) < 1e-7);
                    }
                }
            }
        }

        #[test]
        fn incremental_rows_match_cold_solve(p in random_lp(), split in 0usize..5) {
            let k = split.min(p.rows.len());
            let head = LpProblem { rows: p.rows[..k].to_vec(), ..p.clone() };
            let mut lp = DualSimplex::new(&head).unwrap();
            lp.solve().unwrap();
            lp.add_rows(&p.rows[k..]).unwrap();
            let warm = lp.solve().unwrap();
            let cold = solve_lp(&p).unwrap();
            prop_assert_eq!(warm.status, cold.status);
            if cold.status == LpStatus::Optimal {
                prop_assert!((warm.objective - cold.objective).abs() < 1e-7);
                let again = lp.solve().unwrap();
                prop_assert!((again.objective - warm.objective).abs() < 1e-7);
            }
        }

        #[test]
        fn bound_changes_match_cold_solve(p in random_lp(), col in 0usize..5, fix_up in any::<bool>()) {
            let col = col % p.num_cols();
            let mut lp = DualSimplex::new(&p).unwrap();
            lp.solve().unwrap();
            let v = if fix_up { p.upper[col] } else { 0.0 };
            lp.set_bounds(col, v, v).unwrap();
            let warm = lp.solve().unwrap();
            let mut q = p.clone();
            q.lower[col] = v;
            q.upper[col] = v;
            let cold = solve_lp(&q).unwrap();
            prop_assert_eq!(warm.status, cold.status);
            if cold.status == LpStatus::Optimal {
                prop_assert!((warm.objective - cold.objective).abs() < 1e-7);
            }
            lp.set_bounds(col, p.lower[col], p.upper[col]).unwrap();
            let back = lp.solve().unwrap();
            let orig = solve_lp(&p).unwrap();
            prop_assert_eq!(back.status, orig.status);
            if orig.status == LpStatus::Optimal {
                prop_assert!((back.objective - orig.objective).abs() < 1e-7);
            }
        }
    }
}
