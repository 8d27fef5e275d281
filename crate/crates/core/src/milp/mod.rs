//! A small dense LP/MILP engine and the three formulations used by the
//! attack and protection code.
//!
//! [`solve_lp`] is a bounded-variable primal simplex (two phases, Dantzig
//! pricing with a switch to Bland's rule on stalling); [`solve_milp`] is
//! best-bound branch-and-bound over it. Both re-check the returned point
//! against the original model before reporting it.

mod bnb;
mod cic;
mod cls;
mod simplex;
mod spac;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

pub use bnb::solve_milp;
pub use cic::{build_cic_milp, CicModel, CicOptions, GeneratorResponse, ImpactFlows};
pub use cls::{build_cls_lp, ClsModel};
pub use simplex::solve_lp;
pub use spac::{build_spac_milp, SpacModel};

use crate::{Error, Result};

/// Feasibility tolerance used when re-checking solutions.
pub const CHECK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * values[v.0]).sum()
    }

    /// Amount by which `values` violate the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }

    fn scale(&self, values: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .map(|&(v, a)| (a * values[v.0]).abs())
            .fold(self.rhs.abs(), f64::max)
            .max(1.0)
    }
}

/// A linear (or mixed-integer) program in the natural row form
/// `lower <= x <= upper`, `a_i x (<=|=|>=) b_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub variables: Vec<Variable>,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        LinearProgram { sense, variables: Vec::new(), objective: Vec::new(), constraints: Vec::new() }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, integer: bool) -> VarId {
        self.variables.push(Variable { name: name.into(), lower, upper, integer });
        self.objective.push(0.0);
        VarId(self.variables.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, 0.0, 1.0, true)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, lower, upper, false)
    }

    pub fn set_objective(&mut self, var: VarId, coeff: f64) {
        self.objective[var.0] = coeff;
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        self.constraints.push(Constraint { name: name.into(), coeffs, relation, rhs });
        self.constraints.len() - 1
    }

    pub fn var_count(&self) -> usize {
        self.variables.len()
    }

    pub fn integer_count(&self) -> usize {
        self.variables.iter().filter(|v| v.integer).count()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, v) in self.variables.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(Error::invalid(format!("variable {i} ({}) has empty bounds", v.name)));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.rhs.is_nan() || !c.rhs.is_finite() {
                return Err(Error::invalid(format!("row {i} ({}) has a non-finite rhs", c.name)));
            }
            for &(v, a) in &c.coeffs {
                if v.0 >= self.variables.len() {
                    return Err(Error::UnknownId { kind: "variable", id: v.0 });
                }
                if !a.is_finite() {
                    return Err(Error::invalid(format!("row {i} ({}) has a non-finite coefficient", c.name)));
                }
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("objective has a non-finite coefficient"));
        }
        Ok(())
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, x)| c * x).sum()
    }

    /// Largest scaled bound, row, or integrality violation of `values`.
    pub fn max_violation(&self, values: &[f64], check_integrality: bool) -> f64 {
        let mut worst = 0.0f64;
        for (v, &x) in self.variables.iter().zip(values) {
            let scale = x.abs().max(1.0);
            worst = worst.max((v.lower - x).max(x - v.upper).max(0.0) / scale);
            if check_integrality && v.integer {
                worst = worst.max((x - libm::round(x)).abs());
            }
        }
        for c in &self.constraints {
            worst = worst.max(c.violation(values) / c.scale(values));
        }
        worst
    }

    /// `true` when the objective takes integer values at every integer
    /// feasible point: integer coefficients on integer variables only.
    pub fn has_integral_objective(&self) -> bool {
        self.variables.iter().zip(&self.objective).all(|(v, &c)| {
            c == 0.0 || (v.integer && c == libm::round(c))
        })
    }

    /// The model in the CPLEX LP text format.
    pub fn to_lp_format(&self) -> String {
        let name = |i: usize| -> String {
            let raw = &self.variables[i].name;
            let ok = !raw.is_empty()
                && raw.chars().all(|c| c.is_ascii_alphanumeric() || "_.[]".contains(c))
                && !raw.starts_with(|c: char| c.is_ascii_digit() || c == '.');
            if ok {
                raw.clone()
            } else {
                format!("x{i}")
            }
        };
        let term_list = |out: &mut String, terms: &mut dyn Iterator<Item = (usize, f64)>| {
            let mut first = true;
            for (i, a) in terms {
                if a == 0.0 {
                    continue;
                }
                match (a < 0.0, first) {
                    (true, _) => out.push_str(" -"),
                    (false, false) => out.push_str(" +"),
                    (false, true) => {}
                }
                let _ = write!(out, " {} {}", a.abs(), name(i));
                first = false;
            }
            if first {
                out.push_str(" 0");
            }
        };
        let mut out = String::new();
        out.push_str(match self.sense {
            Sense::Minimize => "Minimize\n obj:",
            Sense::Maximize => "Maximize\n obj:",
        });
        term_list(&mut out, &mut self.objective.iter().copied().enumerate());
        out.push_str("\nSubject To\n");
        for (r, c) in self.constraints.iter().enumerate() {
            let _ = write!(out, " c{r}:");
            term_list(&mut out, &mut c.coeffs.iter().map(|&(v, a)| (v.0, a)));
            let op = match c.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            let _ = writeln!(out, " {op} {}", c.rhs);
        }
        out.push_str("Bounds\n");
        for (i, v) in self.variables.iter().enumerate() {
            match (v.lower.is_finite(), v.upper.is_finite()) {
                (false, false) => {
                    let _ = writeln!(out, " {} free", name(i));
                }
                (true, true) => {
                    let _ = writeln!(out, " {} <= {} <= {}", v.lower, name(i), v.upper);
                }
                (true, false) => {
                    let _ = writeln!(out, " {} >= {}", name(i), v.lower);
                }
                (false, true) => {
                    let _ = writeln!(out, " -inf <= {} <= {}", name(i), v.upper);
                }
            }
        }
        let ints: Vec<usize> = (0..self.variables.len()).filter(|&i| self.variables[i].integer).collect();
        if !ints.is_empty() {
            out.push_str("General\n");
            for i in ints {
                let _ = writeln!(out, " {}", name(i));
            }
        }
        out.push_str("End\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    /// The node budget ran out; `values` holds the best incumbent, if any.
    BudgetExceeded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: Status,
    /// Objective in the model's own sense; NaN when there is no point.
    pub objective: f64,
    /// One value per variable; empty when there is no point.
    pub values: Vec<f64>,
    /// Branch-and-bound nodes explored (1 for a plain LP).
    pub nodes: usize,
}

impl MilpSolution {
    pub(crate) fn without_point(status: Status, nodes: usize) -> Self {
        MilpSolution { status, objective: f64::NAN, values: Vec::new(), nodes }
    }

    pub fn has_point(&self) -> bool {
        !self.values.is_empty()
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }

    /// Value rounded to the nearest integer, for binaries.
    pub fn is_set(&self, var: VarId) -> bool {
        self.values[var.0] > 0.5
    }
}
