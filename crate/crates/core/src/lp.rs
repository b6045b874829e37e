//! Dense bounded-variable primal simplex.
//!
//! Solves `min c·x` subject to linear rows and per-variable bounds
//! `lower ≤ x ≤ upper` with finite lower bounds. Phase one drives
//! artificial variables out of an identity start basis; phase two optimizes
//! over the remaining columns. Nonbasic variables sit at either bound, so
//! box constraints never become rows.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<(usize, f64)>,
    relation: Relation,
    rhs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LpProblem {
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Largest row or bound violation of `x`.
    pub max_residual: f64,
}

const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;
const REFINE_ABOVE: f64 = 1e-10;
const DEGENERATE_RUN: usize = 50;

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable and returns its index. `lower` must be finite.
    pub fn add_var(&mut self, lower: f64, upper: f64, cost: f64) -> usize {
        assert!(lower.is_finite(), "lower bound must be finite");
        assert!(upper >= lower, "empty variable range");
        self.lower.push(lower);
        self.upper.push(upper);
        self.cost.push(cost);
        self.lower.len() - 1
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.cost[var] = cost;
    }

    pub fn set_upper(&mut self, var: usize, upper: f64) {
        assert!(upper >= self.lower[var]);
        self.upper[var] = upper;
    }

    pub fn add_row(&mut self, coeffs: &[(usize, f64)], relation: Relation, rhs: f64) -> usize {
        debug_assert!(coeffs.iter().all(|&(j, _)| j < self.lower.len()));
        self.rows.push(Row {
            coeffs: coeffs.to_vec(),
            relation,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn max_residual(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for row in &self.rows {
            let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let gap = lhs - row.rhs;
            worst = worst.max(match row.relation {
                Relation::Le => gap,
                Relation::Ge => -gap,
                Relation::Eq => gap.abs(),
            });
        }
        worst
    }

    /// Minimizes the objective.
    pub fn solve(&self) -> Result<LpSolution> {
        let mut tab = Tableau::phase_one(self);
        let art_start = tab.n_real;
        let phase_one_cost: Vec<f64> = (0..tab.n)
            .map(|j| if j >= art_start { 1.0 } else { 0.0 })
            .collect();
        tab.run(&phase_one_cost, tab.n)?;
        let infeasibility: f64 = (art_start..tab.n).map(|j| tab.val[j]).sum();
        let scale = self.rows.iter().fold(1.0f64, |s, r| s.max(r.rhs.abs()));
        if infeasibility > FEAS_TOL * scale {
            return Err(Error::Lp {
                iterations: tab.iterations,
                message: format!("infeasible (phase one residual {infeasibility:.3e})"),
            });
        }
        tab.drop_artificials();

        let mut cost = vec![0.0; tab.n];
        cost[..self.cost.len()].copy_from_slice(&self.cost);
        match tab.run(&cost, tab.n) {
            Err(Error::Lp { iterations, message }) if message == "unbounded" => {
                return Err(Error::Lp {
                    iterations,
                    message: "objective unbounded below".into(),
                })
            }
            other => other?,
        }

        let mut x = tab.val[..self.num_vars()].to_vec();
        let mut max_residual = self.max_residual(&x);
        if max_residual > REFINE_ABOVE {
            tab.refine(self)?;
            x = tab.val[..self.num_vars()].to_vec();
            max_residual = self.max_residual(&x);
        }
        if !(max_residual <= FEAS_TOL) {
            return Err(Error::Lp {
                iterations: tab.iterations,
                message: format!("primal residual {max_residual:.3e} after refinement"),
            });
        }
        Ok(LpSolution {
            objective: self.objective(&x),
            x,
            iterations: tab.iterations,
            max_residual,
        })
    }
}

struct Tableau {
    m: usize,
    n: usize,
    /// Structural plus slack columns; artificials follow.
    n_real: usize,
    t: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    val: Vec<f64>,
    at_upper: Vec<bool>,
    basis: Vec<usize>,
    basic_row: Vec<Option<usize>>,
    /// Original row index of each tableau row.
    origin: Vec<usize>,
    /// Original rows with slack columns, kept for refinement.
    slack_of: Vec<Option<(usize, f64)>>,
    iterations: usize,
    limit: usize,
}

impl Tableau {
    fn phase_one(p: &LpProblem) -> Self {
        let nv = p.num_vars();
        let m = p.rows.len();
        let mut slack_of = vec![None; m];
        let mut n_real = nv;
        for (i, row) in p.rows.iter().enumerate() {
            let sign = match row.relation {
                Relation::Le => 1.0,
                Relation::Ge => -1.0,
                Relation::Eq => continue,
            };
            slack_of[i] = Some((n_real, sign));
            n_real += 1;
        }
        let n = n_real + m;
        let mut lower = p.lower.clone();
        let mut upper = p.upper.clone();
        lower.resize(n, 0.0);
        upper.resize(n, f64::INFINITY);
        let val = lower.clone();
        let mut t = vec![0.0; m * n];
        for (i, row) in p.rows.iter().enumerate() {
            let dense = &mut t[i * n..(i + 1) * n];
            for &(j, a) in &row.coeffs {
                dense[j] += a;
            }
            if let Some((s, sign)) = slack_of[i] {
                dense[s] = sign;
            }
            let lhs: f64 = dense[..n_real].iter().zip(&val).map(|(a, v)| a * v).sum();
            let r = row.rhs - lhs;
            if r < 0.0 {
                dense[..n_real].iter_mut().for_each(|a| *a = -*a);
            }
            dense[n_real + i] = 1.0;
        }
        let mut tab = Tableau {
            m,
            n,
            n_real,
            t,
            lower,
            upper,
            val,
            at_upper: vec![false; n],
            basis: (n_real..n).collect(),
            basic_row: vec![None; n],
            origin: (0..m).collect(),
            slack_of,
            iterations: 0,
            limit: 50 * (m + n) + 1000,
        };
        for i in 0..m {
            let row = &p.rows[i];
            let lhs: f64 = row.coeffs.iter().map(|&(j, a)| a * tab.val[j]).sum();
            tab.val[n_real + i] = (row.rhs - lhs).abs();
            tab.basic_row[n_real + i] = Some(i);
        }
        tab
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.t[i * self.n..(i + 1) * self.n]
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (dj, a) in d.iter_mut().zip(self.row(i)) {
                    *dj -= cb * a;
                }
            }
        }
        d
    }

    fn run(&mut self, cost: &[f64], enterable: usize) -> Result<()> {
        let mut d = self.reduced_costs(cost);
        let mut degenerate = 0usize;
        loop {
            self.iterations += 1;
            if self.iterations > self.limit {
                return Err(Error::Lp {
                    iterations: self.iterations,
                    message: "iteration limit reached".into(),
                });
            }
            let bland = degenerate > DEGENERATE_RUN;
            let Some(q) = self.entering(&d, enterable, bland) else {
                return Ok(());
            };
            let dir = if self.at_upper[q] { -1.0 } else { 1.0 };

            let mut theta = self.upper[q] - self.lower[q];
            let mut leave: Option<(usize, bool)> = None;
            let mut best_pivot = 0.0;
            for i in 0..self.m {
                let a = dir * self.t[i * self.n + q];
                let b = self.basis[i];
                let (lim, hits_upper) = if a > PIVOT_TOL {
                    ((self.val[b] - self.lower[b]) / a, false)
                } else if a < -PIVOT_TOL {
                    ((self.upper[b] - self.val[b]) / -a, true)
                } else {
                    continue;
                };
                let lim = lim.max(0.0);
                // ties prefer a bound flip, then the larger pivot
                let better = match leave {
                    _ if lim < theta - 1e-12 => true,
                    Some((r, _)) if lim <= theta + 1e-12 => {
                        if bland {
                            b < self.basis[r]
                        } else {
                            a.abs() > best_pivot
                        }
                    }
                    _ => false,
                };
                if better {
                    theta = lim;
                    leave = Some((i, hits_upper));
                    best_pivot = a.abs();
                }
            }
            if !theta.is_finite() {
                return Err(Error::Lp {
                    iterations: self.iterations,
                    message: "unbounded".into(),
                });
            }
            degenerate = if theta < 1e-12 { degenerate + 1 } else { 0 };

            if theta > 0.0 {
                for i in 0..self.m {
                    let a = self.t[i * self.n + q];
                    if a != 0.0 {
                        self.val[self.basis[i]] -= theta * dir * a;
                    }
                }
                self.val[q] += theta * dir;
            }
            match leave {
                None => {
                    self.at_upper[q] = !self.at_upper[q];
                    self.val[q] = if self.at_upper[q] {
                        self.upper[q]
                    } else {
                        self.lower[q]
                    };
                }
                Some((r, hits_upper)) => {
                    let l = self.basis[r];
                    self.val[l] = if hits_upper { self.upper[l] } else { self.lower[l] };
                    self.at_upper[l] = hits_upper;
                    self.pivot(r, q, &mut d);
                }
            }
        }
    }

    fn entering(&self, d: &[f64], enterable: usize, bland: bool) -> Option<usize> {
        let mut best = None;
        let mut best_score = OPT_TOL;
        for j in 0..enterable {
            if self.basic_row[j].is_some() || self.upper[j] <= self.lower[j] {
                continue;
            }
            let score = if self.at_upper[j] { d[j] } else { -d[j] };
            if score > best_score {
                if bland {
                    return Some(j);
                }
                best_score = score;
                best = Some(j);
            }
        }
        best
    }

    fn pivot(&mut self, r: usize, q: usize, d: &mut [f64]) {
        let n = self.n;
        let (head, rest) = self.t.split_at_mut(r * n);
        let (pivot_row, tail) = rest.split_at_mut(n);
        let p = pivot_row[q];
        for a in pivot_row.iter_mut() {
            *a /= p;
        }
        pivot_row[q] = 1.0;
        let eliminate = |row: &mut [f64]| {
            let f = row[q];
            if f != 0.0 {
                for (a, &pr) in row.iter_mut().zip(pivot_row.iter()) {
                    *a -= f * pr;
                }
                row[q] = 0.0;
            }
        };
        head.chunks_exact_mut(n).for_each(eliminate);
        tail.chunks_exact_mut(n).for_each(eliminate);
        let f = d[q];
        if f != 0.0 {
            for (dj, &pr) in d.iter_mut().zip(pivot_row.iter()) {
                *dj -= f * pr;
            }
            d[q] = 0.0;
        }
        let old = self.basis[r];
        self.basic_row[old] = None;
        self.basis[r] = q;
        self.basic_row[q] = Some(r);
    }

    /// Pivots basic artificials out, removes redundant rows, and drops the
    /// artificial columns.
    fn drop_artificials(&mut self) {
        let mut dummy = vec![0.0; self.n];
        let mut keep = vec![true; self.m];
        for r in 0..self.m {
            let b = self.basis[r];
            if b < self.n_real {
                continue;
            }
            let row = self.row(r);
            let best = (0..self.n_real)
                .filter(|&j| self.basic_row[j].is_none())
                .max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()));
            match best {
                Some(j) if row[j].abs() > 1e-7 => {
                    self.val[b] = 0.0;
                    self.pivot(r, j, &mut dummy);
                }
                _ => keep[r] = false,
            }
        }
        let n_new = self.n_real;
        let mut t = Vec::with_capacity(self.m * n_new);
        let mut basis = Vec::new();
        let mut origin = Vec::new();
        for r in 0..self.m {
            if keep[r] {
                t.extend_from_slice(&self.row(r)[..n_new]);
                basis.push(self.basis[r]);
                origin.push(self.origin[r]);
            }
        }
        self.m = basis.len();
        self.n = n_new;
        self.t = t;
        self.basis = basis;
        self.origin = origin;
        self.lower.truncate(n_new);
        self.upper.truncate(n_new);
        self.val.truncate(n_new);
        self.at_upper.truncate(n_new);
        self.basic_row = vec![None; n_new];
        for (i, &b) in self.basis.iter().enumerate() {
            self.basic_row[b] = Some(i);
        }
    }

    /// Recomputes basic values from the original rows by dense Gaussian
    /// elimination on the basis matrix.
    fn refine(&mut self, p: &LpProblem) -> Result<()> {
        let m = self.m;
        let mut col_of = vec![usize::MAX; self.n];
        for (k, &b) in self.basis.iter().enumerate() {
            col_of[b] = k;
        }
        let mut a = vec![0.0; m * m];
        let mut rhs = vec![0.0; m];
        for (i, &orig) in self.origin.iter().enumerate() {
            let row = &p.rows[orig];
            let mut r = row.rhs;
            let mut add = |j: usize, coef: f64| {
                if col_of[j] != usize::MAX {
                    a[i * m + col_of[j]] += coef;
                } else {
                    r -= coef * self.val[j];
                }
            };
            for &(j, coef) in &row.coeffs {
                add(j, coef);
            }
            if let Some((s, sign)) = self.slack_of[orig] {
                add(s, sign);
            }
            rhs[i] = r;
        }
        let x = gauss_solve(&mut a, &mut rhs, m).ok_or_else(|| Error::Lp {
            iterations: self.iterations,
            message: "singular basis during refinement".into(),
        })?;
        for (k, &b) in self.basis.iter().enumerate() {
            self.val[b] = x[k];
        }
        Ok(())
    }
}

fn gauss_solve(a: &mut [f64], b: &mut [f64], m: usize) -> Option<Vec<f64>> {
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i * m + col].abs().total_cmp(&a[j * m + col].abs()))?;
        if a[piv * m + col].abs() < 1e-12 {
            return None;
        }
        if piv != col {
            for k in 0..m {
                a.swap(piv * m + k, col * m + k);
            }
            b.swap(piv, col);
        }
        let p = a[col * m + col];
        for i in col + 1..m {
            let f = a[i * m + col] / p;
            if f != 0.0 {
                for k in col..m {
                    a[i * m + k] -= f * a[col * m + k];
                }
                b[i] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let s: f64 = (i + 1..m).map(|k| a[i * m + k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i * m + i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-8
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y; x <= 4; 2y <= 12; 3x + 2y <= 18  -> (2, 6), 36
        let mut p = LpProblem::new();
        let x = p.add_var(0.0, f64::INFINITY, -3.0);
        let y = p.add_var(0.0, f64::INFINITY, -5.0);
        p.add_row(&[(x, 1.0)], Relation::Le, 4.0);
        p.add_row(&[(y, 2.0)], Relation::Le, 12.0);
        p.add_row(&[(x, 3.0), (y, 2.0)], Relation::Le, 18.0);
        let s = p.solve().unwrap();
        assert!(close(s.objective, -36.0));
        assert!(close(s.x[0], 2.0) && close(s.x[1], 6.0));
    }

    #[test]
    fn bounds_replace_rows() {
        let mut p = LpProblem::new();
        let x = p.add_var(0.0, 4.0, -3.0);
        let y = p.add_var(0.0, 6.0, -5.0);
        p.add_row(&[(x, 3.0), (y, 2.0)], Relation::Le, 18.0);
        let s = p.solve().unwrap();
        assert!(close(s.objective, -36.0));
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + 2y; x + y = 3; x - y >= -1; y >= 0.5
        let mut p = LpProblem::new();
        let x = p.add_var(0.0, f64::INFINITY, 1.0);
        let y = p.add_var(0.5, f64::INFINITY, 2.0);
        p.add_row(&[(x, 1.0), (y, 1.0)], Relation::Eq, 3.0);
        p.add_row(&[(x, 1.0), (y, -1.0)], Relation::Ge, -1.0);
        let s = p.solve().unwrap();
        assert!(close(s.x[0], 2.5) && close(s.x[1], 0.5));
        assert!(close(s.objective, 3.5));
    }

    #[test]
    fn redundant_equalities() {
        let mut p = LpProblem::new();
        let x = p.add_var(0.0, 10.0, -1.0);
        let y = p.add_var(0.0, 10.0, -1.0);
        p.add_row(&[(x, 1.0), (y, 1.0)], Relation::Eq, 5.0);
        p.add_row(&[(x, 2.0), (y, 2.0)], Relation::Eq, 10.0);
        let s = p.solve().unwrap();
        assert!(close(s.objective, -5.0));
    }

    #[test]
    fn infeasible_reports_iterations() {
        let mut p = LpProblem::new();
        let x = p.add_var(0.0, 1.0, 1.0);
        p.add_row(&[(x, 1.0)], Relation::Ge, 2.0);
        match p.solve() {
            Err(Error::Lp { message, .. }) => assert!(message.contains("infeasible")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unbounded_detected() {
        let mut p = LpProblem::new();
        let x = p.add_var(0.0, f64::INFINITY, -1.0);
        let y = p.add_var(0.0, f64::INFINITY, 0.0);
        p.add_row(&[(x, 1.0), (y, -1.0)], Relation::Le, 1.0);
        assert!(matches!(p.solve(), Err(Error::Lp { .. })));
    }

    #[test]
    fn beale_cycling_example_terminates() {
        // classic cycling instance under Dantzig pricing
        let mut p = LpProblem::new();
        let x: Vec<usize> = [-0.75, 150.0, -0.02, 6.0]
            .iter()
            .map(|&c| p.add_var(0.0, f64::INFINITY, c))
            .collect();
        p.add_row(
            &[(x[0], 0.25), (x[1], -60.0), (x[2], -0.04), (x[3], 9.0)],
            Relation::Le,
            0.0,
        );
        p.add_row(
            &[(x[0], 0.5), (x[1], -90.0), (x[2], -0.02), (x[3], 3.0)],
            Relation::Le,
            0.0,
        );
        p.add_row(&[(x[2], 1.0)], Relation::Le, 1.0);
        let s = p.solve().unwrap();
        assert!(close(s.objective, -0.05), "{}", s.objective);
    }

    #[test]
    fn nonzero_lower_bounds() {
        let mut p = LpProblem::new();
        let x = p.add_var(2.0, 5.0, 1.0);
        let y = p.add_var(-3.0, 3.0, 1.0);
        p.add_row(&[(x, 1.0), (y, 1.0)], Relation::Ge, 1.0);
        let s = p.solve().unwrap();
        assert!(close(s.objective, 1.0));
        assert!(s.x[0] >= 2.0 - 1e-12 && s.x[1] >= -3.0 - 1e-12);
    }
}
