//! Linear and mixed-integer programming.
//!
//! Callers build a [`LinearProgram`] (or wrap one in a [`MixedIntegerProgram`])
//! and hand it to [`solve_lp`] / [`solve_milp`]. Nothing else in the crate
//! touches the solver internals, so a different backend can be dropped in
//! behind these two functions.

mod milp;
mod simplex;

use std::fmt::Write as _;

pub use milp::{solve_milp, solve_milp_with, MilpOptions};
pub use simplex::{solve_lp, solve_lp_with, PivotRule, SimplexOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        }
    }
}

/// Sparse linear row `Σ coef·x[var] relation rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
    pub name: Option<String>,
}

impl Constraint {
    pub fn new(terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Self {
        Self { terms, relation, rhs, name: None }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    /// Per-variable `(lower, upper)`; infinities allowed.
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// All variables start with bounds `[0, +∞)`.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self { sense, objective, constraints: Vec::new(), bounds: vec![(0.0, f64::INFINITY); n] }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, constraint: Constraint) -> usize {
        self.constraints.push(constraint);
        self.constraints.len() - 1
    }

    pub fn add(&mut self, terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> usize {
        self.add_constraint(Constraint::new(terms, relation, rhs))
    }

    /// Dense-row convenience; zero coefficients are dropped.
    pub fn add_dense(&mut self, coefficients: &[f64], relation: Relation, rhs: f64) -> usize {
        let terms = coefficients.iter().enumerate().filter(|(_, a)| **a != 0.0).map(|(j, a)| (j, *a)).collect();
        self.add(terms, relation, rhs)
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.bounds[var] = (lower, upper);
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| c.violation(x)).fold(0.0, f64::max);
        let bounds = self.bounds.iter().zip(x).map(|(&(lo, hi), &v)| (lo - v).max(v - hi).max(0.0)).fold(0.0, f64::max);
        rows.max(bounds)
    }

    pub fn validate(&self) -> Result<(), String> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(format!("{} bounds for {n} variables", self.bounds.len()));
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(format!("variable {j} has bounds [{lo}, {hi}]"));
            }
        }
        for (r, row) in self.constraints.iter().enumerate() {
            if let Some(&(j, _)) = row.terms.iter().find(|(j, _)| *j >= n) {
                return Err(format!("constraint {r} references variable {j} of {n}"));
            }
            if !row.rhs.is_finite() || row.terms.iter().any(|(_, a)| !a.is_finite()) {
                return Err(format!("constraint {r} has non-finite data"));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err("objective has non-finite coefficients".into());
        }
        Ok(())
    }

    /// Plain-text dump, one constraint per line as `name: coeffs relation rhs`,
    /// for cross-checking against external solvers.
    pub fn to_lp_text(&self) -> String {
        let mut out = String::new();
        let sense = match self.sense {
            Sense::Maximize => "maximize",
            Sense::Minimize => "minimize",
        };
        let obj: Vec<(usize, f64)> =
            self.objective.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(j, c)| (j, *c)).collect();
        let _ = writeln!(out, "{sense}: {}", format_terms(&obj));
        for (r, row) in self.constraints.iter().enumerate() {
            let name = row.name.clone().unwrap_or_else(|| format!("c{r}"));
            let _ = writeln!(out, "{name}: {} {} {}", format_terms(&row.terms), row.relation.symbol(), row.rhs);
        }
        for (j, (lo, hi)) in self.bounds.iter().enumerate() {
            let _ = writeln!(out, "bound x{j}: {lo} <= x{j} <= {hi}");
        }
        out
    }
}

fn format_terms(terms: &[(usize, f64)]) -> String {
    if terms.is_empty() {
        return "0".into();
    }
    terms.iter().map(|(j, a)| format!("{a} x{j}")).collect::<Vec<_>>().join(" + ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedIntegerProgram {
    pub lp: LinearProgram,
    /// Indices of variables that must take integral values.
    pub integer_vars: Vec<usize>,
}

impl MixedIntegerProgram {
    pub fn new(lp: LinearProgram, mut integer_vars: Vec<usize>) -> Self {
        integer_vars.sort_unstable();
        integer_vars.dedup();
        Self { lp, integer_vars }
    }

    pub fn to_lp_text(&self) -> String {
        let mut out = self.lp.to_lp_text();
        let ints: Vec<String> = self.integer_vars.iter().map(|j| format!("x{j}")).collect();
        let _ = writeln!(out, "integer: {}", ints.join(" "));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Objective in the program's own sense; NaN when no assignment exists.
    pub objective: f64,
    pub assignment: Vec<f64>,
    /// Simplex pivots (LP) or total pivots over all nodes (MILP).
    pub pivots: usize,
    /// Branching operations performed; 0 for LPs and integral relaxations.
    pub branchings: usize,
}

impl SolveResult {
    pub(crate) fn without_solution(status: SolveStatus, pivots: usize) -> Self {
        Self { status, objective: f64::NAN, assignment: Vec::new(), pivots, branchings: 0 }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}
