//! Dense two-phase primal simplex with bounded variables.
//!
//! Solves `min c'x  s.t.  A x (<=|>=|=) b,  0 <= x <= u` where `u` may be
//! infinite. Upper bounds are handled by bound flipping rather than extra
//! rows, which keeps the tableau at one row per real constraint. Dantzig
//! pricing, falling back to Bland's rule after a run of degenerate pivots.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-10;
const DEGENERATE_RUN: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
struct Row {
    terms: Vec<(usize, f64)>,
    relation: Relation,
    rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    objective: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

impl LinearProgram {
    pub fn new(vars: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; vars],
            upper: vec![f64::INFINITY; vars],
            rows: Vec::new(),
        }
    }

    pub fn vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    pub fn set_upper(&mut self, var: usize, upper: f64) {
        self.upper[var] = upper;
    }

    pub fn add_row(&mut self, terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        debug_assert!(terms.iter().all(|&(j, _)| j < self.vars()));
        self.rows.push(Row {
            terms,
            relation,
            rhs,
        });
    }

    pub fn minimize(&self) -> Result<LpOutcome> {
        if self.upper.iter().any(|&u| u < 0.0) {
            return Ok(LpOutcome::Infeasible);
        }
        let mut tab = Tableau::build(self);
        let art_cost: Vec<f64> = (0..tab.cols)
            .map(|j| if j >= tab.first_artificial { 1.0 } else { 0.0 })
            .collect();
        if tab.first_artificial < tab.cols {
            match tab.optimize(&art_cost)? {
                Phase::Optimal => {}
                Phase::Unbounded => return Err(Error::Solver("phase one unbounded".into())),
            }
            let infeasibility: f64 = (0..tab.m)
                .filter(|&r| tab.basis[r] >= tab.first_artificial)
                .map(|r| tab.beta[r])
                .sum();
            let scale = 1.0 + self.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
            if infeasibility > 1e-9 * scale {
                return Ok(LpOutcome::Infeasible);
            }
            for j in tab.first_artificial..tab.cols {
                tab.upper[j] = 0.0;
            }
        }
        let mut cost = vec![0.0; tab.cols];
        cost[..self.vars()].copy_from_slice(&self.objective);
        match tab.optimize(&cost)? {
            Phase::Optimal => {}
            Phase::Unbounded => return Ok(LpOutcome::Unbounded),
        }
        let x = tab.structural_values(self.vars());
        let objective = x.iter().zip(&self.objective).map(|(x, c)| x * c).sum();
        Ok(LpOutcome::Optimal { x, objective })
    }
}

enum Phase {
    Optimal,
    Unbounded,
}

struct Tableau {
    m: usize,
    cols: usize,
    first_artificial: usize,
    /// Row-major `m x cols`, holds B^-1 A.
    t: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    upper: Vec<f64>,
    at_upper: Vec<bool>,
    basic_row: Vec<Option<usize>>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.rows.len();
        let nv = lp.vars();
        let slacks = lp.rows.iter().filter(|r| r.relation != Relation::Eq).count();
        // Rows whose slack enters the starting basis with coefficient +1 need
        // no artificial.
        let mut row_sign = vec![1.0; m];
        let mut needs_art = vec![false; m];
        for (r, row) in lp.rows.iter().enumerate() {
            row_sign[r] = if row.rhs < 0.0 { -1.0 } else { 1.0 };
            let slack_coef = match row.relation {
                Relation::Le => Some(row_sign[r]),
                Relation::Ge => Some(-row_sign[r]),
                Relation::Eq => None,
            };
            needs_art[r] = slack_coef != Some(1.0);
        }
        let arts = needs_art.iter().filter(|&&a| a).count();
        let cols = nv + slacks + arts;
        let first_artificial = nv + slacks;
        let mut t = vec![0.0; m * cols];
        let mut beta = vec![0.0; m];
        let mut basis = vec![0; m];
        let mut upper = vec![f64::INFINITY; cols];
        upper[..nv].copy_from_slice(&lp.upper);
        let (mut slack_col, mut art_col) = (nv, first_artificial);
        for (r, row) in lp.rows.iter().enumerate() {
            let s = row_sign[r];
            let line = &mut t[r * cols..(r + 1) * cols];
            for &(j, a) in &row.terms {
                line[j] += s * a;
            }
            beta[r] = s * row.rhs;
            match row.relation {
                Relation::Le | Relation::Ge => {
                    let coef = if row.relation == Relation::Le { s } else { -s };
                    line[slack_col] = coef;
                    if !needs_art[r] {
                        basis[r] = slack_col;
                    }
                    slack_col += 1;
                }
                Relation::Eq => {}
            }
            if needs_art[r] {
                line[art_col] = 1.0;
                basis[r] = art_col;
                art_col += 1;
            }
        }
        let mut basic_row = vec![None; cols];
        for (r, &b) in basis.iter().enumerate() {
            basic_row[b] = Some(r);
        }
        Tableau {
            m,
            cols,
            first_artificial,
            t,
            beta,
            basis,
            upper,
            at_upper: vec![false; cols],
            basic_row,
        }
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let line = &self.t[r * self.cols..(r + 1) * self.cols];
                for (dj, a) in d.iter_mut().zip(line) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    fn optimize(&mut self, cost: &[f64]) -> Result<Phase> {
        let mut d = self.reduced_costs(cost);
        let limit = 200 * (self.m + self.cols) + 1000;
        let mut degenerate = 0usize;
        for _ in 0..limit {
            let bland = degenerate >= DEGENERATE_RUN;
            let Some((q, dir)) = self.entering(&d, bland) else {
                return Ok(Phase::Optimal);
            };
            let Some((theta, leave)) = self.ratio_test(q, dir, bland) else {
                return Ok(Phase::Unbounded);
            };
            if theta <= PIVOT_TOL {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            for r in 0..self.m {
                let a = self.t[r * self.cols + q];
                if a != 0.0 {
                    self.beta[r] -= theta * dir * a;
                }
            }
            match leave {
                None => self.at_upper[q] = !self.at_upper[q],
                Some((r, to_upper)) => {
                    let entering_value =
                        if self.at_upper[q] { self.upper[q] } else { 0.0 } + dir * theta;
                    let old = self.basis[r];
                    self.at_upper[old] = to_upper;
                    self.basic_row[old] = None;
                    self.at_upper[q] = false;
                    self.pivot(r, q, &mut d);
                    self.beta[r] = entering_value;
                    self.basis[r] = q;
                    self.basic_row[q] = Some(r);
                }
            }
        }
        Err(Error::Solver(format!("iteration limit {limit} reached")))
    }

    fn entering(&self, d: &[f64], bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.cols {
            if self.basic_row[j].is_some() || self.upper[j] == 0.0 {
                continue;
            }
            let dir = if !self.at_upper[j] && d[j] < -OPT_TOL {
                1.0
            } else if self.at_upper[j] && d[j] > OPT_TOL {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, score)| d[j].abs() > score) {
                best = Some((j, dir, d[j].abs()));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Step length and the leaving row (with the bound it leaves at), or
    /// `None` for the row when the entering variable just flips bounds.
    #[allow(clippy::type_complexity)]
    fn ratio_test(&self, q: usize, dir: f64, bland: bool) -> Option<(f64, Option<(usize, bool)>)> {
        let mut theta = self.upper[q];
        let mut leave: Option<(usize, bool)> = None;
        let mut best_pivot = 0.0;
        for r in 0..self.m {
            let a = self.t[r * self.cols + q] * dir;
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[r];
            let (limit, to_upper) = if a > 0.0 {
                (self.beta[r].max(0.0) / a, false)
            } else {
                let ub = self.upper[b];
                if ub.is_infinite() {
                    continue;
                }
                ((ub - self.beta[r]).max(0.0) / -a, true)
            };
            // On a tie with the entering bound flip, the flip wins.
            let better = if limit < theta - 1e-12 {
                true
            } else if limit <= theta + 1e-12 {
                match leave {
                    Some((lr, _)) if bland => b < self.basis[lr],
                    Some(_) => a.abs() > best_pivot,
                    None => false,
                }
            } else {
                false
            };
            if better {
                theta = limit;
                leave = Some((r, to_upper));
                best_pivot = a.abs();
            }
        }
        if theta.is_infinite() {
            return None;
        }
        Some((theta, leave))
    }

    fn pivot(&mut self, r: usize, q: usize, d: &mut [f64]) {
        let cols = self.cols;
        let p = self.t[r * cols + q];
        let (before, rest) = self.t.split_at_mut(r * cols);
        let (prow, after) = rest.split_at_mut(cols);
        for v in prow.iter_mut() {
            *v /= p;
        }
        let eliminate = |line: &mut [f64]| {
            let f = line[q];
            if f != 0.0 {
                for (v, pv) in line.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                line[q] = 0.0;
            }
        };
        before.chunks_exact_mut(cols).for_each(eliminate);
        after.chunks_exact_mut(cols).for_each(eliminate);
        eliminate(d);
    }

    fn structural_values(&self, nv: usize) -> Vec<f64> {
        (0..nv)
            .map(|j| {
                let v = match self.basic_row[j] {
                    Some(r) => self.beta[r],
                    None if self.at_upper[j] => self.upper[j],
                    None => 0.0,
                };
                v.clamp(0.0, self.upper[j])
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(lp: &LinearProgram) -> (Vec<f64>, f64) {
        match lp.minimize().unwrap() {
            LpOutcome::Optimal { x, objective } => (x, objective),
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y st x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), 36
        let mut lp = LinearProgram::new(2);
        lp.set_cost(0, -3.0);
        lp.set_cost(1, -5.0);
        lp.add_row(vec![(0, 1.0)], Relation::Le, 4.0);
        lp.add_row(vec![(1, 2.0)], Relation::Le, 12.0);
        lp.add_row(vec![(0, 3.0), (1, 2.0)], Relation::Le, 18.0);
        let (x, obj) = optimal(&lp);
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
        assert!((obj + 36.0).abs() < 1e-9);
    }

    #[test]
    fn upper_bounds_flip() {
        // max x + y with x <= 1.5, y <= 2 as bounds, x + y <= 3
        let mut lp = LinearProgram::new(2);
        lp.set_cost(0, -1.0);
        lp.set_cost(1, -1.0);
        lp.set_upper(0, 1.5);
        lp.set_upper(1, 2.0);
        lp.add_row(vec![(0, 1.0), (1, 1.0)], Relation::Le, 3.0);
        let (_, obj) = optimal(&lp);
        assert!((obj + 3.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + 2y st x + y = 4, x >= 1, y >= 1.5 (as rows)
        let mut lp = LinearProgram::new(2);
        lp.set_cost(0, 1.0);
        lp.set_cost(1, 2.0);
        lp.add_row(vec![(0, 1.0), (1, 1.0)], Relation::Eq, 4.0);
        lp.add_row(vec![(0, 1.0)], Relation::Ge, 1.0);
        lp.add_row(vec![(1, 1.0)], Relation::Ge, 1.5);
        let (x, obj) = optimal(&lp);
        assert!((x[0] - 2.5).abs() < 1e-9 && (x[1] - 1.5).abs() < 1e-9);
        assert!((obj - 5.5).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs() {
        // min t st 2 - y - t <= 0, y <= 1 (bound): t = 1
        let mut lp = LinearProgram::new(2);
        lp.set_cost(1, 1.0);
        lp.set_upper(0, 1.0);
        lp.add_row(vec![(0, -1.0), (1, -1.0)], Relation::Le, -2.0);
        let (_, obj) = optimal(&lp);
        assert!((obj - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.set_upper(0, 1.0);
        lp.add_row(vec![(0, 1.0)], Relation::Ge, 2.0);
        assert_eq!(lp.minimize().unwrap(), LpOutcome::Infeasible);

        let mut lp = LinearProgram::new(2);
        lp.set_cost(0, -1.0);
        lp.add_row(vec![(0, 1.0), (1, -1.0)], Relation::Le, 1.0);
        assert_eq!(lp.minimize().unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Classic cycling example (Beale); Bland fallback must terminate.
        let mut lp = LinearProgram::new(4);
        for (j, c) in [-0.75, 150.0, -0.02, 6.0].into_iter().enumerate() {
            lp.set_cost(j, c);
        }
        lp.add_row(vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)], Relation::Le, 0.0);
        lp.add_row(vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)], Relation::Le, 0.0);
        lp.add_row(vec![(2, 1.0)], Relation::Le, 1.0);
        let (_, obj) = optimal(&lp);
        assert!((obj + 0.05).abs() < 1e-9);
    }
}
