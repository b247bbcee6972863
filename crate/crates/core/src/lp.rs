//! Dense two-phase primal simplex.
//!
//! Problems in this crate are small (a few hundred rows at most), so the
//! solver keeps a full tableau. Pricing is Dantzig's rule and the ratio
//! test breaks ties lexicographically, which rules out cycling on the very
//! degenerate programs built from event trees; remaining ties go by index,
//! so the pivot sequence is a deterministic function of the input. The tableau is rebuilt from the
//! original data every few dozen pivots, and the final basic solution is
//! recomputed by an LU solve.

use thiserror::Error;

/// Tolerance used for phase-one feasibility and reduced-cost optimality.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Reported optimal points must satisfy every constraint to this tolerance.
pub const VERIFY_TOL: f64 = 1e-8;

const REDUCED_COST_TOL: f64 = 1e-10;
const PIVOT_TOL: f64 = 1e-9;
const RATIO_TIE_TOL: f64 = 1e-12;
const LEX_TIE_TOL: f64 = 1e-12;
const MAX_PIVOTS: usize = 50_000;
const REFACTOR_EVERY: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Clone, Debug)]
pub enum LpStatus {
    Optimal(Solution),
    Infeasible,
    Unbounded,
}

impl LpStatus {
    pub fn optimal(self) -> Option<Solution> {
        match self {
            LpStatus::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("simplex did not terminate within {0} pivots")]
    IterationLimit(usize),
    #[error("optimal point violates constraint {row} by {amount:e}")]
    ConstraintViolation { row: usize, amount: f64 },
    #[error("malformed linear program: {0}")]
    Malformed(String),
}

/// A linear program over `n` variables with per-variable bounds.
///
/// Variables default to `[0, +inf)`.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    direction: Direction,
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(direction: Direction, n_vars: usize) -> Self {
        LinearProgram {
            direction,
            objective: vec![0.0; n_vars],
            lower: vec![0.0; n_vars],
            upper: vec![f64::INFINITY; n_vars],
            constraints: Vec::new(),
        }
    }

    pub fn minimize(n_vars: usize) -> Self {
        Self::new(Direction::Minimize, n_vars)
    }

    pub fn maximize(n_vars: usize) -> Self {
        Self::new(Direction::Maximize, n_vars)
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn set_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] = coeff;
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn set_free(&mut self, var: usize) {
        self.set_bounds(var, f64::NEG_INFINITY, f64::INFINITY);
    }

    pub fn add_constraint<I>(&mut self, coeffs: I, relation: Relation, rhs: f64)
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let coeffs = coeffs.into_iter().filter(|&(_, a)| a != 0.0).collect();
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn solve(&self) -> Result<LpStatus, LpError> {
        self.check_shape()?;
        let std = StandardForm::build(self);
        let status = std.solve()?;
        if let LpStatus::Optimal(sol) = &status {
            self.verify(&sol.x)?;
        }
        Ok(status)
    }

    fn check_shape(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        for (i, c) in self.constraints.iter().enumerate() {
            if let Some(&(j, _)) = c.coeffs.iter().find(|&&(j, _)| j >= n) {
                return Err(LpError::Malformed(format!(
                    "constraint {i} references variable {j} of {n}"
                )));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|&(_, a)| !a.is_finite()) {
                return Err(LpError::Malformed(format!("constraint {i} is not finite")));
            }
        }
        for j in 0..n {
            if self.lower[j] > self.upper[j] || self.lower[j] == f64::INFINITY {
                return Err(LpError::Malformed(format!("empty bounds on variable {j}")));
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `x`, with its row.
    pub fn max_violation(&self, x: &[f64]) -> (usize, f64) {
        let mut worst = (0, 0.0);
        for (i, c) in self.constraints.iter().enumerate() {
            let lhs: f64 = c.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let scale = 1.0 + c.rhs.abs();
            let v = match c.relation {
                Relation::Le => (lhs - c.rhs) / scale,
                Relation::Ge => (c.rhs - lhs) / scale,
                Relation::Eq => (lhs - c.rhs).abs() / scale,
            };
            if v > worst.1 {
                worst = (i, v);
            }
        }
        let m = self.constraints.len();
        for (j, &xj) in x.iter().enumerate() {
            let v = (self.lower[j] - xj).max(xj - self.upper[j]);
            if v > worst.1 {
                worst = (m + j, v);
            }
        }
        worst
    }

    fn verify(&self, x: &[f64]) -> Result<(), LpError> {
        let (row, amount) = self.max_violation(x);
        if amount > VERIFY_TOL {
            return Err(LpError::ConstraintViolation { row, amount });
        }
        Ok(())
    }
}

/// How an original variable is expressed through nonnegative columns.
#[derive(Clone, Debug)]
struct VarMap {
    offset: f64,
    cols: Vec<(usize, f64)>,
}

struct StandardForm {
    n_vars: usize,
    maps: Vec<VarMap>,
    /// Dense rows over structural + slack + artificial columns.
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    cost: Vec<f64>,
    n_cols: usize,
    first_artificial: usize,
    initial_basis: Vec<usize>,
    orig_objective: Vec<f64>,
}

impl StandardForm {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.n_vars();
        let mut maps = Vec::with_capacity(n);
        let mut n_struct = 0;
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            let (lo, hi) = (lp.lower[j], lp.upper[j]);
            let map = if lo.is_finite() {
                let col = n_struct;
                n_struct += 1;
                if hi.is_finite() {
                    bound_rows.push((col, hi - lo));
                }
                VarMap {
                    offset: lo,
                    cols: vec![(col, 1.0)],
                }
            } else if hi.is_finite() {
                let col = n_struct;
                n_struct += 1;
                VarMap {
                    offset: hi,
                    cols: vec![(col, -1.0)],
                }
            } else {
                let col = n_struct;
                n_struct += 2;
                VarMap {
                    offset: 0.0,
                    cols: vec![(col, 1.0), (col + 1, -1.0)],
                }
            };
            maps.push(map);
        }

        // Rows over structural columns, normalized to rhs >= 0.
        let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
        for c in &lp.constraints {
            let mut row = vec![0.0; n_struct];
            let mut rhs = c.rhs;
            for &(j, a) in &c.coeffs {
                rhs -= a * maps[j].offset;
                for &(col, s) in &maps[j].cols {
                    row[col] += a * s;
                }
            }
            rows.push((row, c.relation, rhs));
        }
        for &(col, ub) in &bound_rows {
            let mut row = vec![0.0; n_struct];
            row[col] = 1.0;
            rows.push((row, Relation::Le, ub));
        }
        for (row, rel, rhs) in rows.iter_mut() {
            if *rhs < 0.0 {
                row.iter_mut().for_each(|v| *v = -*v);
                *rhs = -*rhs;
                *rel = match *rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
        }

        let n_slack = rows
            .iter()
            .filter(|(_, r, _)| *r != Relation::Eq)
            .count();
        let n_art = rows
            .iter()
            .filter(|(_, r, _)| *r != Relation::Le)
            .count();
        let first_slack = n_struct;
        let first_artificial = n_struct + n_slack;
        let n_cols = first_artificial + n_art;

        let mut a = Vec::with_capacity(rows.len());
        let mut b = Vec::with_capacity(rows.len());
        let mut basis = Vec::with_capacity(rows.len());
        let (mut s, mut art) = (first_slack, first_artificial);
        for (row, rel, rhs) in rows {
            let mut full = row;
            full.resize(n_cols, 0.0);
            match rel {
                Relation::Le => {
                    full[s] = 1.0;
                    basis.push(s);
                    s += 1;
                }
                Relation::Ge => {
                    full[s] = -1.0;
                    full[art] = 1.0;
                    basis.push(art);
                    s += 1;
                    art += 1;
                }
                Relation::Eq => {
                    full[art] = 1.0;
                    basis.push(art);
                    art += 1;
                }
            }
            a.push(full);
            b.push(rhs);
        }

        let sign = match lp.direction {
            Direction::Minimize => 1.0,
            Direction::Maximize => -1.0,
        };
        let mut cost = vec![0.0; n_cols];
        for (j, map) in maps.iter().enumerate() {
            let c = sign * lp.objective[j];
            for &(col, s) in &map.cols {
                cost[col] += c * s;
            }
        }

        StandardForm {
            n_vars: n,
            maps,
            a,
            b,
            cost,
            n_cols,
            first_artificial,
            initial_basis: basis,
            orig_objective: lp.objective.clone(),
        }
    }

    fn solve(&self) -> Result<LpStatus, LpError> {
        let m = self.a.len();
        let mut tab = Tableau::new(&self.a, &self.b, self.initial_basis.clone());

        if self.first_artificial < self.n_cols {
            let mut phase1 = vec![0.0; self.n_cols];
            phase1[self.first_artificial..].iter_mut().for_each(|c| *c = 1.0);
            let allowed = vec![true; self.n_cols];
            tab.set_cost(&phase1);
            if !tab.run(&allowed, &self.a, &self.b)? {
                return Err(LpError::Malformed("phase one unbounded".into()));
            }
            let bscale = 1.0 + self.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if tab.objective_value() > FEASIBILITY_TOL * bscale {
                return Ok(LpStatus::Infeasible);
            }
            // Pivot zero-level artificials out of the basis where possible.
            for r in 0..m {
                if tab.basis[r] >= self.first_artificial {
                    let col = (0..self.first_artificial)
                        .filter(|&j| tab.at(r, j).abs() > 1e-7)
                        .max_by(|&i, &j| tab.at(r, i).abs().total_cmp(&tab.at(r, j).abs()));
                    if let Some(col) = col {
                        tab.pivot(r, col);
                    }
                }
            }
            tab.refactor(&self.a, &self.b);
        }

        let mut allowed = vec![true; self.n_cols];
        allowed[self.first_artificial..]
            .iter_mut()
            .for_each(|a| *a = false);
        tab.set_cost(&self.cost);
        if !tab.run(&allowed, &self.a, &self.b)? {
            return Ok(LpStatus::Unbounded);
        }

        let values = self.refined_values(&tab);
        let x: Vec<f64> = (0..self.n_vars)
            .map(|j| {
                let map = &self.maps[j];
                map.offset + map.cols.iter().map(|&(c, s)| s * values[c]).sum::<f64>()
            })
            .collect();
        let objective = x
            .iter()
            .zip(&self.orig_objective)
            .map(|(xi, ci)| xi * ci)
            .sum();
        Ok(LpStatus::Optimal(Solution { x, objective }))
    }

    /// Column values of the final basic solution, recomputed by solving
    /// `B x_B = b` against the original (unpivoted) rows.
    fn refined_values(&self, tab: &Tableau) -> Vec<f64> {
        let m = self.a.len();
        let mut values = vec![0.0; self.n_cols];
        let fallback: Vec<f64> = (0..m).map(|r| tab.rhs(r)).collect();
        let solved = Lu::factor(basis_matrix(&self.a, &tab.basis)).map(|lu| lu.solve(self.b.clone()));
        let basic = match solved {
            Some(xb) if xb.iter().all(|v| *v > -1e-7) => xb,
            _ => fallback,
        };
        for (r, &c) in tab.basis.iter().enumerate() {
            values[c] = basic[r].max(0.0);
        }
        values
    }
}

fn basis_matrix(a: &[Vec<f64>], basis: &[usize]) -> Vec<Vec<f64>> {
    a.iter()
        .map(|row| basis.iter().map(|&c| row[c]).collect())
        .collect()
}

struct Tableau {
    m: usize,
    width: usize,
    /// `m` constraint rows followed by the reduced-cost row; last column is
    /// the right-hand side.
    data: Vec<f64>,
    basis: Vec<usize>,
    initial_basis: Vec<usize>,
    cost: Vec<f64>,
}

impl Tableau {
    fn new(a: &[Vec<f64>], b: &[f64], basis: Vec<usize>) -> Self {
        let m = a.len();
        let n = a.first().map_or(0, Vec::len);
        let width = n + 1;
        let mut data = vec![0.0; (m + 1) * width];
        for i in 0..m {
            data[i * width..i * width + n].copy_from_slice(&a[i]);
            data[i * width + n] = b[i];
        }
        Tableau {
            m,
            width,
            data,
            initial_basis: basis.clone(),
            basis,
            cost: vec![0.0; n],
        }
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 1)
    }

    fn objective_value(&self) -> f64 {
        -self.rhs(self.m)
    }

    fn set_cost(&mut self, cost: &[f64]) {
        self.cost = cost.to_vec();
        self.reprice();
    }

    fn reprice(&mut self) {
        let w = self.width;
        let base = self.m * w;
        self.data[base..base + w - 1].copy_from_slice(&self.cost);
        self.data[base + w - 1] = 0.0;
        for r in 0..self.m {
            let cb = self.cost[self.basis[r]];
            if cb != 0.0 {
                for c in 0..w {
                    self.data[base + c] -= cb * self.data[r * w + c];
                }
            }
        }
        for r in 0..self.m {
            self.data[base + self.basis[r]] = 0.0;
        }
    }

    /// Rebuilds the constraint rows as `B^-1 [A | b]` from the original
    /// data, discarding accumulated round-off. Keeps the current rows if
    /// the basis matrix is numerically singular.
    fn refactor(&mut self, a: &[Vec<f64>], b: &[f64]) {
        let Some(lu) = Lu::factor(basis_matrix(a, &self.basis)) else {
            return;
        };
        let w = self.width;
        let n = w - 1;
        for c in 0..=n {
            let col: Vec<f64> = if c < n { a.iter().map(|row| row[c]).collect() } else { b.to_vec() };
            let x = lu.solve(col);
            for r in 0..self.m {
                self.data[r * w + c] = x[r];
            }
        }
        for (r, &c) in self.basis.iter().enumerate() {
            for i in 0..self.m {
                self.data[i * w + c] = if i == r { 1.0 } else { 0.0 };
            }
        }
        for r in 0..self.m {
            let v = &mut self.data[r * w + n];
            if *v < 0.0 && *v > -FEASIBILITY_TOL {
                *v = 0.0;
            }
        }
        self.reprice();
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.at(r, c);
        for v in &mut self.data[r * w..(r + 1) * w] {
            *v /= p;
        }
        self.data[r * w + c] = 1.0;
        let pivot_row: Vec<f64> = self.data[r * w..(r + 1) * w].to_vec();
        for i in 0..=self.m {
            if i == r {
                continue;
            }
            let f = self.data[i * w + c];
            if f != 0.0 {
                let row = &mut self.data[i * w..(i + 1) * w];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        for i in 0..self.m {
            let v = &mut self.data[i * w + w - 1];
            if *v < 0.0 && *v > -FEASIBILITY_TOL {
                *v = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Most negative reduced cost, smallest index on ties.
    fn entering(&self, allowed: &[bool]) -> Option<usize> {
        let n = self.width - 1;
        (0..n)
            .filter(|&j| allowed[j] && self.at(self.m, j) < -REDUCED_COST_TOL)
            .min_by(|&i, &j| self.at(self.m, i).total_cmp(&self.at(self.m, j)).then(i.cmp(&j)))
    }

    /// Minimum-ratio row; ties are broken lexicographically on the rows of
    /// `B^-1`, which sit in the columns of the initial identity basis. This
    /// rule cannot cycle.
    fn leaving(&self, c: usize) -> Option<usize> {
        let mut rows: Vec<(usize, f64)> = (0..self.m)
            .filter_map(|r| {
                let a = self.at(r, c);
                (a > PIVOT_TOL).then_some((r, a))
            })
            .collect();
        let theta = rows
            .iter()
            .map(|&(r, a)| self.rhs(r).max(0.0) / a)
            .fold(f64::INFINITY, f64::min);
        if !theta.is_finite() {
            return None;
        }
        rows.retain(|&(r, a)| self.rhs(r).max(0.0) / a <= theta + RATIO_TIE_TOL * (1.0 + theta));
        for &col in &self.initial_basis {
            if rows.len() == 1 {
                break;
            }
            let lo = rows
                .iter()
                .map(|&(r, a)| self.at(r, col) / a)
                .fold(f64::INFINITY, f64::min);
            rows.retain(|&(r, a)| self.at(r, col) / a <= lo + LEX_TIE_TOL);
        }
        rows.iter()
            .max_by(|x, y| x.1.total_cmp(&y.1).then(self.basis[y.0].cmp(&self.basis[x.0])))
            .map(|&(r, _)| r)
    }

    /// Pivots to optimality. Returns `false` if unbounded.
    fn run(&mut self, allowed: &[bool], a: &[Vec<f64>], b: &[f64]) -> Result<bool, LpError> {
        for k in 1..=MAX_PIVOTS {
            let Some(c) = self.entering(allowed) else {
                return Ok(true);
            };
            let Some(r) = self.leaving(c) else {
                return Ok(false);
            };
            self.pivot(r, c);
            if k % REFACTOR_EVERY == 0 {
                self.refactor(a, b);
            }
        }
        Err(LpError::IterationLimit(MAX_PIVOTS))
    }
}

/// LU factors of a square matrix with row pivoting.
struct Lu {
    lu: Vec<Vec<f64>>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(mut a: Vec<Vec<f64>>) -> Option<Lu> {
        let n = a.len();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
            if a[p][k].abs() < 1e-13 {
                return None;
            }
            a.swap(k, p);
            perm.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                a[i][k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        a[i][j] -= f * a[k][j];
                    }
                }
            }
        }
        Some(Lu { lu: a, perm })
    }

    fn solve(&self, b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i][j] * y[j]).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[i][j] * y[j]).sum();
            y[i] = (y[i] - s) / self.lu[i][i];
        }
        y
    }
}
