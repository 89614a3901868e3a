//! Linear programming entry points.

use crate::error::LpError;
use crate::model::{MioModel, RowId, VarId};
use crate::simplex::{BasisSnapshot, Outcome, Simplex};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of an LP solve. Duals are sensitivities of the objective to each
/// row's right-hand side; reduced costs follow the same convention for
/// variable bounds. Both are only meaningful when `status` is optimal.
#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Solves the LP relaxation of `model` (binaries relaxed to `[0, 1]`).
pub fn solve_lp(model: &MioModel) -> Result<LpSolution, LpError> {
    let mut s = LpSolver::new(model)?;
    s.solve()
}

/// Opaque copy of a simplex basis, usable to warm-start a later solve.
#[derive(Clone, Debug)]
pub struct Basis(pub(crate) BasisSnapshot);

/// Reusable LP solver that keeps its basis between solves. Changing costs,
/// bounds, or appending columns and then calling [`LpSolver::solve`] starts
/// from the previous basis.
#[derive(Clone, Debug)]
pub struct LpSolver {
    engine: Simplex,
}

impl LpSolver {
    pub fn new(model: &MioModel) -> Result<Self, LpError> {
        model.validate()?;
        Ok(Self {
            engine: Simplex::new(model),
        })
    }

    pub fn num_vars(&self) -> usize {
        self.engine.num_structurals()
    }

    pub fn num_rows(&self) -> usize {
        self.engine.num_rows()
    }

    pub fn solve(&mut self) -> Result<LpSolution, LpError> {
        let start_iters = self.engine.iterations;
        let outcome = self.engine.solve()?;
        let status = match outcome {
            Outcome::Optimal => LpStatus::Optimal,
            Outcome::Infeasible => LpStatus::Infeasible,
            Outcome::Unbounded => LpStatus::Unbounded,
        };
        let (duals, reduced_costs) = if status == LpStatus::Optimal {
            (
                self.engine.row_duals(),
                self.engine.structural_reduced_costs(),
            )
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(LpSolution {
            status,
            primal: self.engine.structural_values(),
            duals,
            reduced_costs,
            objective: self.engine.objective_value(),
            iterations: self.engine.iterations - start_iters,
        })
    }

    pub fn set_objective(&mut self, terms: &[(VarId, f64)], constant: f64) {
        self.engine.set_costs(terms, constant);
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        self.engine.set_var_bounds(var.0, lower, upper);
    }

    pub fn bounds(&self, var: VarId) -> (f64, f64) {
        self.engine.var_bounds(var.0)
    }

    /// Appends a continuous column with the given row coefficients.
    pub fn add_column(&mut self, entries: &[(RowId, f64)], lower: f64, upper: f64, cost: f64) -> VarId {
        let e: Vec<(usize, f64)> = entries.iter().map(|&(r, v)| (r.0, v)).collect();
        VarId(self.engine.add_column(&e, lower, upper, cost))
    }

    pub fn basis(&self) -> Basis {
        Basis(self.engine.snapshot())
    }

    pub fn set_basis(&mut self, basis: &Basis) -> Result<(), LpError> {
        self.engine.restore(&basis.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Sense;

    #[test]
    fn single_bound_row_has_unit_dual() {
        let mut m = MioModel::new();
        let x = m.add_continuous(0.0, 10.0, "x");
        m.add_constraint([(x, 1.0)], Sense::Ge, 3.0, "lb");
        m.set_objective([(x, 1.0)], 0.0);
        let s = solve_lp(&m).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 3.0).abs() < 1e-9);
        assert!((s.duals[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible_rows() {
        let mut m = MioModel::new();
        let x = m.add_continuous(f64::NEG_INFINITY, f64::INFINITY, "x");
        m.add_constraint([(x, 1.0)], Sense::Le, 0.0, "a");
        m.add_constraint([(x, 1.0)], Sense::Ge, 1.0, "b");
        m.set_objective([(x, 1.0)], 0.0);
        assert_eq!(solve_lp(&m).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let mut m = MioModel::new();
        let x = m.add_continuous(0.0, f64::INFINITY, "x");
        let y = m.add_continuous(0.0, f64::INFINITY, "y");
        m.add_constraint([(x, 1.0), (y, -1.0)], Sense::Le, 1.0, "r");
        m.set_objective([(x, -1.0)], 0.0);
        assert_eq!(solve_lp(&m).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn simplex_corner_of_unit_simplex() {
        let mut m = MioModel::new();
        let x1 = m.add_continuous(0.0, f64::INFINITY, "x1");
        let x2 = m.add_continuous(0.0, f64::INFINITY, "x2");
        m.add_constraint([(x1, 1.0), (x2, 1.0)], Sense::Le, 1.0, "cap");
        m.set_objective([(x1, -1.0), (x2, -1.0)], 0.0);
        let s = solve_lp(&m).unwrap();
        assert!((s.objective + 1.0).abs() < 1e-9);
    }

    #[test]
    fn warm_start_after_column_and_bound_changes() {
        let mut m = MioModel::new();
        let x = m.add_continuous(0.0, 4.0, "x");
        let r = m.add_constraint([(x, 1.0)], Sense::Ge, 2.0, "r");
        m.set_objective([(x, 1.0)], 0.0);
        let mut s = LpSolver::new(&m).unwrap();
        assert!((s.solve().unwrap().objective - 2.0).abs() < 1e-12);
        let y = s.add_column(&[(r, 2.0)], 0.0, f64::INFINITY, 0.5);
        let sol = s.solve().unwrap();
        assert!((sol.objective - 0.5).abs() < 1e-12);
        assert!((sol.primal[y.0] - 1.0).abs() < 1e-12);
        s.set_bounds(y, 0.0, 0.5);
        let sol = s.solve().unwrap();
        assert!((sol.objective - 1.25).abs() < 1e-12);
    }
}
