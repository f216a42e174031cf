//! Dense two-phase primal simplex with Bland's rule.
//!
//! Problems are `max c·x` subject to rows `a·x {≤,=,≥} b` and `x ≥ 0`. Both
//! entering and leaving variables are chosen by lowest index, which rules out
//! cycling and makes the returned vertex a deterministic function of the
//! input. Sized for desk-scale problems (tens of rows and columns).

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Smallest magnitude accepted as a pivot element or an improving reduced cost.
pub const PIVOT_TOL: f64 = 1e-9;
/// Constraint residual allowed in a feasible point.
pub const FEAS_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Constraint {
            coeffs,
            relation,
            rhs,
        }
    }

    pub fn residual(&self, x: &[f64]) -> f64 {
        let lhs: f64 = self.coeffs.iter().zip(x).map(|(a, x)| a * x).sum();
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// `max objective·x` subject to `constraints` and `x ≥ 0`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>) -> Self {
        LpProblem {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.len()
    }

    pub fn push(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint::new(coeffs, relation, rhs));
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("linear program", "non-finite objective coefficient"));
        }
        for (r, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "row {r} has {} coefficients for {n} variables",
                    c.coeffs.len()
                )));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(Error::invalid("linear program", format!("row {r} is not finite")));
            }
        }
        Ok(())
    }

    /// Largest residual of `x` over all rows and non-negativity.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| c.residual(x));
        let signs = x.iter().map(|&v| (-v).max(0.0));
        rows.chain(signs).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural variable values; all zero unless `Optimal`.
    pub x: Vec<f64>,
    pub objective_value: f64,
    /// Basic columns of the standard-form tableau (structural columns first,
    /// then one slack/surplus per inequality row), ascending.
    pub basis: Vec<usize>,
}

/// Standard-form tableau: `rows[r]` holds the constraint coefficients over all
/// columns followed by the right-hand side.
struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Columns at or beyond this index are artificial.
    first_artificial: usize,
    num_cols: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn build(p: &LpProblem) -> Self {
        let n = p.num_vars();
        let num_slack = p
            .constraints
            .iter()
            .filter(|c| c.relation != Relation::Eq)
            .count();
        let num_art = p
            .constraints
            .iter()
            .filter(|c| {
                let rel = if c.rhs < 0.0 { flip(c.relation) } else { c.relation };
                rel != Relation::Le
            })
            .count();
        let first_artificial = n + num_slack;
        let num_cols = first_artificial + num_art;

        let mut rows = Vec::with_capacity(p.num_rows());
        let mut basis = Vec::with_capacity(p.num_rows());
        let (mut next_slack, mut next_art) = (n, first_artificial);
        for c in &p.constraints {
            let mut row = vec![0.0; num_cols + 1];
            let sign = if c.rhs < 0.0 { -1.0 } else { 1.0 };
            for (k, &a) in c.coeffs.iter().enumerate() {
                row[k] = sign * a;
            }
            row[num_cols] = sign * c.rhs;
            let rel = if c.rhs < 0.0 { flip(c.relation) } else { c.relation };
            if c.relation != Relation::Eq {
                // Slack for ≤ (after the sign flip, a surplus for ≥).
                row[next_slack] = if rel == Relation::Le { 1.0 } else { -1.0 };
                if rel == Relation::Le {
                    basis.push(next_slack);
                }
                next_slack += 1;
            }
            if rel != Relation::Le {
                row[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            }
            rows.push(row);
        }
        Tableau {
            rows,
            basis,
            first_artificial,
            num_cols,
        }
    }

    fn rhs(&self, r: usize) -> f64 {
        self.rows[r][self.num_cols]
    }

    fn pivot(&mut self, r: usize, e: usize, obj: &mut [f64]) {
        let piv = self.rows[r][e];
        for v in self.rows[r].iter_mut() {
            *v /= piv;
        }
        self.rows[r][e] = 1.0;
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[e];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                row[e] = 0.0;
            }
        }
        let f = obj[e];
        if f != 0.0 {
            for (v, p) in obj.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            obj[e] = 0.0;
        }
        self.basis[r] = e;
    }

    /// Reduced-cost row for `cost` (indexed by column), with `-z` in the last slot.
    fn objective_row(&self, cost: &[f64]) -> Vec<f64> {
        let mut obj = vec![0.0; self.num_cols + 1];
        obj[..cost.len()].copy_from_slice(cost);
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = obj[b];
            if cb != 0.0 {
                for (v, a) in obj.iter_mut().zip(&self.rows[r]) {
                    *v -= cb * a;
                }
            }
        }
        obj
    }

    /// Primal simplex iterations with Bland's rule over columns `< allowed`.
    fn optimize(&mut self, obj: &mut [f64], allowed: usize) -> Result<Outcome> {
        let m = self.rows.len();
        let limit = 10_000 + 50 * (m + self.num_cols).pow(2);
        for _ in 0..limit {
            let Some(e) = (0..allowed).find(|&j| obj[j] > PIVOT_TOL) else {
                return Ok(Outcome::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                let a = self.rows[r][e];
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(r).max(0.0) / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((best, best_ratio)) => {
                        let tie = (ratio - best_ratio).abs() <= 1e-12 * best_ratio.abs().max(1.0);
                        if ratio < best_ratio && !tie || tie && self.basis[r] < self.basis[best] {
                            Some((r, ratio))
                        } else {
                            Some((best, best_ratio))
                        }
                    }
                };
            }
            match leave {
                None => return Ok(Outcome::Unbounded),
                Some((r, _)) => self.pivot(r, e, obj),
            }
        }
        Err(Error::Lp("not converging (iteration limit reached)"))
    }

    /// Phase 1. Returns whether a feasible point exists; on success the
    /// basis holds no artificial column and redundant rows are removed.
    fn phase_one(&mut self) -> Result<bool> {
        if self.first_artificial == self.num_cols {
            return Ok(true);
        }
        let mut cost = vec![0.0; self.num_cols];
        for c in &mut cost[self.first_artificial..] {
            *c = -1.0;
        }
        let mut obj = self.objective_row(&cost);
        self.optimize(&mut obj, self.num_cols)?;
        let infeasibility = obj[self.num_cols];
        if infeasibility > FEAS_TOL {
            return Ok(false);
        }

        // Pivot remaining (zero-valued) artificials out of the basis, or drop
        // their row when it is a combination of the others.
        let mut r = 0;
        while r < self.rows.len() {
            if self.basis[r] < self.first_artificial {
                r += 1;
                continue;
            }
            let col = (0..self.first_artificial).find(|&j| self.rows[r][j].abs() > PIVOT_TOL);
            match col {
                Some(j) => {
                    self.pivot(r, j, &mut obj);
                    r += 1;
                }
                None => {
                    self.rows.remove(r);
                    self.basis.remove(r);
                }
            }
        }
        Ok(true)
    }

    fn structural_values(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for (r, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = self.rhs(r).max(0.0);
            }
        }
        x
    }
}

fn flip(rel: Relation) -> Relation {
    match rel {
        Relation::Le => Relation::Ge,
        Relation::Ge => Relation::Le,
        Relation::Eq => Relation::Eq,
    }
}

/// Solves `p` to a basic optimal solution, or reports infeasibility or
/// unboundedness.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution> {
    p.validate()?;
    let n = p.num_vars();
    let mut t = Tableau::build(p);
    let empty = |status| LpSolution {
        status,
        x: vec![0.0; n],
        objective_value: 0.0,
        basis: Vec::new(),
    };
    if !t.phase_one()? {
        return Ok(empty(LpStatus::Infeasible));
    }
    let mut obj = t.objective_row(&p.objective);
    match t.optimize(&mut obj, t.first_artificial)? {
        Outcome::Unbounded => Ok(empty(LpStatus::Unbounded)),
        Outcome::Optimal => {
            let x = t.structural_values(n);
            let objective_value = p.objective.iter().zip(&x).map(|(c, x)| c * x).sum();
            let mut basis = t.basis.clone();
            basis.sort_unstable();
            Ok(LpSolution {
                status: LpStatus::Optimal,
                x,
                objective_value,
                basis,
            })
        }
    }
}

/// Phase 1 only: whether any `x ≥ 0` satisfies every row within [`FEAS_TOL`].
pub fn check_feasible(p: &LpProblem) -> Result<bool> {
    p.validate()?;
    Tableau::build(p).phase_one()
}
