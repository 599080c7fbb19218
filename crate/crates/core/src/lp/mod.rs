//! Linear programs and the solver interface.
//!
//! Problems are assembled sparse, in triplet form, and handed to an [`LpBackend`].
//! [`DenseRevisedSimplex`] is the bundled backend: a two-phase revised simplex with
//! a dense basis inverse, which is the right tool for the tall-and-thin master
//! problems the witness module builds.

mod simplex;

pub use simplex::{DenseRevisedSimplex, SimplexOptions};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    NonNegative,
    Free,
}

/// `opt c.x` subject to `A x (<=|>=|=) b` with nonnegative or free variables.
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub sense: Sense,
    objective: Vec<f64>,
    var_kinds: Vec<VarKind>,
    row_kinds: Vec<RowKind>,
    rhs: Vec<f64>,
    /// `(row, col, value)`; duplicates are summed.
    entries: Vec<(usize, usize, f64)>,
}

impl LpProblem {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            objective: Vec::new(),
            var_kinds: Vec::new(),
            row_kinds: Vec::new(),
            rhs: Vec::new(),
            entries: Vec::new(),
        }
    }

    pub fn add_var(&mut self, kind: VarKind, cost: f64) -> usize {
        self.objective.push(cost);
        self.var_kinds.push(kind);
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, kind: RowKind, rhs: f64) -> usize {
        self.row_kinds.push(kind);
        self.rhs.push(rhs);
        self.rhs.len() - 1
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.rhs.len() && col < self.objective.len());
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    /// Adds a variable together with its column.
    pub fn add_column(&mut self, kind: VarKind, cost: f64, column: &[(usize, f64)]) -> usize {
        let j = self.add_var(kind, cost);
        for &(i, v) in column {
            self.set(i, j, v);
        }
        j
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn var_kinds(&self) -> &[VarKind] {
        &self.var_kinds
    }

    pub fn row_kinds(&self) -> &[RowKind] {
        &self.row_kinds
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Largest violation of the constraints and sign restrictions by `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut lhs = vec![0.0; self.num_rows()];
        for &(i, j, v) in &self.entries {
            lhs[i] += v * x[j];
        }
        let mut worst: f64 = 0.0;
        for (i, kind) in self.row_kinds.iter().enumerate() {
            let d = lhs[i] - self.rhs[i];
            let viol = match kind {
                RowKind::Le => d.max(0.0),
                RowKind::Ge => (-d).max(0.0),
                RowKind::Eq => d.abs(),
            };
            worst = worst.max(viol);
        }
        for (j, kind) in self.var_kinds.iter().enumerate() {
            if *kind == VarKind::NonNegative {
                worst = worst.max(-x[j]);
            }
        }
        worst
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// One basic variable per row, named in problem terms so a basis survives appending columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisEntry {
    /// Variable `j` (the positive part, for free variables).
    Var(usize),
    /// Negative part of free variable `j`.
    VarNeg(usize),
    Slack(usize),
    Artificial(usize),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Basis(pub Vec<BasisEntry>);

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective value in the problem's own sense; meaningful only when optimal.
    pub objective: f64,
    pub x: Vec<f64>,
    /// Shadow prices: derivative of the optimal objective with respect to each right-hand side.
    pub duals: Vec<f64>,
    pub basis: Basis,
    pub iterations: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("basis matrix became singular")]
    Singular,
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

/// A linear-programming solver.
pub trait LpBackend: Sync {
    fn name(&self) -> &str;

    /// Solves `problem`, optionally starting from a basis returned by an earlier solve
    /// of a problem with the same rows. Backends may ignore the warm start.
    fn solve(&self, problem: &LpProblem, warm_start: Option<&Basis>) -> Result<LpSolution, LpError>;
}
