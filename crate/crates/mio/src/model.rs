//! Model container shared by the LP and branch-and-bound solvers.
//!
//! A [`MioModel`] is a minimization problem over continuous and binary
//! variables with sparse linear rows. Every embedding in the toolkit writes
//! into one of these; once built it is treated as immutable by the solvers.

use std::fmt;

use crate::error::ModelError;

/// Dense index of a variable inside its [`MioModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// Dense index of a row inside its [`MioModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowId(pub usize);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }

    /// Lower/upper bounds on the row activity implied by `rhs`.
    pub fn activity_bounds(self, rhs: f64) -> (f64, f64) {
        match self {
            Sense::Le => (f64::NEG_INFINITY, rhs),
            Sense::Eq => (rhs, rhs),
            Sense::Ge => (rhs, f64::INFINITY),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub id: VarId,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub coefficients: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub name: String,
}

impl LinearConstraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefficients.iter().map(|(v, a)| a * x[v.0]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

/// Sparse linear objective plus constant. Direction is always minimize.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Objective {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl Objective {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(v, c)| c * x[v.0]).sum::<f64>()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MioModel {
    variables: Vec<Variable>,
    constraints: Vec<LinearConstraint>,
    objective: Objective,
}

impl MioModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, kind: VarKind, lower: f64, upper: f64, name: impl Into<String>) -> VarId {
        let id = VarId(self.variables.len());
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            VarKind::Continuous => (lower, upper),
        };
        self.variables.push(Variable {
            id,
            kind,
            lower,
            upper,
            name: name.into(),
        });
        id
    }

    pub fn add_continuous(&mut self, lower: f64, upper: f64, name: impl Into<String>) -> VarId {
        self.add_var(VarKind::Continuous, lower, upper, name)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(VarKind::Binary, 0.0, 1.0, name)
    }

    /// Adds a row. Repeated variables are merged and zero coefficients dropped.
    pub fn add_constraint(
        &mut self,
        coefficients: impl IntoIterator<Item = (VarId, f64)>,
        sense: Sense,
        rhs: f64,
        name: impl Into<String>,
    ) -> RowId {
        let id = RowId(self.constraints.len());
        self.constraints.push(LinearConstraint {
            coefficients: merge_terms(coefficients),
            sense,
            rhs,
            name: name.into(),
        });
        id
    }

    pub fn set_objective(&mut self, terms: impl IntoIterator<Item = (VarId, f64)>, constant: f64) {
        self.objective = Objective {
            terms: merge_terms(terms),
            constant,
        };
    }

    /// Adds `coef * var` to the objective.
    pub fn add_objective_term(&mut self, var: VarId, coef: f64) {
        let mut terms = std::mem::take(&mut self.objective.terms);
        terms.push((var, coef));
        self.objective.terms = merge_terms(terms);
    }

    pub fn add_objective_constant(&mut self, c: f64) {
        self.objective.constant += c;
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        let v = &mut self.variables[var.0];
        v.lower = lower;
        v.upper = upper;
    }

    pub fn set_rhs(&mut self, row: RowId, rhs: f64) {
        self.constraints[row.0].rhs = rhs;
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn constraint(&self, id: RowId) -> &LinearConstraint {
        &self.constraints[id.0]
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .map(|v| v.id)
    }

    pub fn has_binaries(&self) -> bool {
        self.variables.iter().any(|v| v.kind == VarKind::Binary)
    }

    /// Largest bound or row violation of `x`, ignoring integrality.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = self
            .variables
            .iter()
            .map(|v| (v.lower - x[v.id.0]).max(x[v.id.0] - v.upper).max(0.0));
        let rows = self.constraints.iter().map(|c| c.violation(x));
        bounds.chain(rows).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.variables.is_empty() {
            return Err(ModelError::Empty);
        }
        let n = self.variables.len();
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(ModelError::InvalidBounds {
                    var: v.name.clone(),
                    lower: v.lower,
                    upper: v.upper,
                });
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(ModelError::InvalidBounds {
                    var: v.name.clone(),
                    lower: v.lower,
                    upper: v.upper,
                });
            }
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(ModelError::NonFinite { row: c.name.clone() });
            }
            let mut seen = std::collections::HashSet::with_capacity(c.coefficients.len());
            for &(v, a) in &c.coefficients {
                if v.0 >= n {
                    return Err(ModelError::UnknownVariable {
                        context: c.name.clone(),
                        index: v.0,
                    });
                }
                if !a.is_finite() {
                    return Err(ModelError::NonFinite { row: c.name.clone() });
                }
                if !seen.insert(v) {
                    return Err(ModelError::DuplicateVariable {
                        row: c.name.clone(),
                        var: self.variables[v.0].name.clone(),
                    });
                }
            }
        }
        for &(v, c) in &self.objective.terms {
            if v.0 >= n {
                return Err(ModelError::UnknownVariable {
                    context: "objective".into(),
                    index: v.0,
                });
            }
            if !c.is_finite() {
                return Err(ModelError::NonFinite {
                    row: "objective".into(),
                });
            }
        }
        Ok(())
    }
}

/// Sums duplicate variables and drops exact zeros, keeping first-seen order.
fn merge_terms(terms: impl IntoIterator<Item = (VarId, f64)>) -> Vec<(VarId, f64)> {
    let mut out: Vec<(VarId, f64)> = Vec::new();
    let mut pos: std::collections::HashMap<VarId, usize> = std::collections::HashMap::new();
    for (v, a) in terms {
        match pos.get(&v) {
            Some(&i) => out[i].1 += a,
            None => {
                pos.insert(v, out.len());
                out.push((v, a));
            }
        }
    }
    out.retain(|&(_, a)| a != 0.0);
    out
}
