//! Big-M constants: the largest value a row's left side can take over the
//! feasible region, by interval arithmetic over the box or by an LP over the
//! known rows and trust region.

use std::cell::RefCell;
use std::collections::HashMap;

use conlearn_mio::{LpSolver, LpStatus, MioModel, VarId};

use super::{EmbedContext, EmbedError};

pub enum BigMPolicy {
    /// Interval arithmetic over the `x` box.
    Interval,
    /// One LP per distinct row over a region model.
    Lp(RegionOracle),
}

/// Maximizes linear forms in `x` over a fixed region. Results are cached by
/// the exact coefficients, and each solve warm-starts from the previous one.
pub struct RegionOracle {
    solver: RefCell<LpSolver>,
    x_vars: Vec<VarId>,
    cache: RefCell<HashMap<Vec<(usize, u64)>, f64>>,
}

impl RegionOracle {
    /// `x_vars[j]` is the region variable standing for decision feature `j`.
    /// Binaries in the region are relaxed, which keeps every maximum valid.
    pub fn new(region: &MioModel, x_vars: Vec<VarId>) -> Result<Self, EmbedError> {
        let mut solver = LpSolver::new(region)?;
        solver.set_objective(&[], 0.0);
        if solver.solve()?.status == LpStatus::Infeasible {
            return Err(EmbedError::InfeasibleRegion);
        }
        Ok(Self {
            solver: RefCell::new(solver),
            x_vars,
            cache: RefCell::new(HashMap::new()),
        })
    }

    /// `max Σ a_j x_j` over the region.
    pub fn max_linear(&self, terms: &[(usize, f64)]) -> Result<f64, EmbedError> {
        if terms.is_empty() {
            return Ok(0.0);
        }
        let key: Vec<(usize, u64)> = terms.iter().map(|&(j, a)| (j, a.to_bits())).collect();
        if let Some(&v) = self.cache.borrow().get(&key) {
            return Ok(v);
        }
        let obj: Vec<(VarId, f64)> = terms.iter().map(|&(j, a)| (self.x_vars[j], -a)).collect();
        let mut solver = self.solver.borrow_mut();
        solver.set_objective(&obj, 0.0);
        let sol = solver.solve()?;
        let v = match sol.status {
            LpStatus::Optimal => -sol.objective,
            LpStatus::Unbounded => return Err(EmbedError::UnboundedRegion),
            LpStatus::Infeasible => return Err(EmbedError::InfeasibleRegion),
        };
        self.cache.borrow_mut().insert(key, v);
        Ok(v)
    }

    pub fn cached(&self) -> usize {
        self.cache.borrow().len()
    }
}

/// `max Σ a_j x_j` over the box.
pub fn interval_max(terms: &[(usize, f64)], bounds: &[(f64, f64)]) -> f64 {
    terms
        .iter()
        .map(|&(j, a)| {
            let (lo, hi) = bounds[j];
            (a * lo).max(a * hi)
        })
        .sum()
}

/// Largest value of `terms·x` under the context's policy.
pub(crate) fn max_form(ctx: &EmbedContext, terms: &[(usize, f64)]) -> Result<f64, EmbedError> {
    let v = match &ctx.big_m {
        BigMPolicy::Interval => interval_max(terms, &ctx.x_bounds),
        BigMPolicy::Lp(oracle) => oracle.max_linear(terms)?,
    };
    if !v.is_finite() {
        return Err(EmbedError::UnboundedRegion);
    }
    Ok(v)
}

/// Smallest `M ≥ 0` with `a·z − b ≤ M` on the region, for a split given by
/// coefficients over the joint input. Context coefficients are evaluated at
/// the fixed `w`.
pub fn compute_big_m(coefficients: &[(usize, f64)], rhs: f64, ctx: &EmbedContext) -> Result<f64, EmbedError> {
    let (terms, constant) = ctx.split_joint(coefficients);
    Ok((max_form(ctx, &terms)? + constant - rhs).max(0.0))
}

/// Safety margin added to LP-derived constants.
pub(crate) fn pad(m: f64) -> f64 {
    m + 1e-7 * (1.0 + m.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use conlearn_mio::Sense;

    #[test]
    fn interval_split_margin() {
        let mut mio = MioModel::new();
        let x = mio.add_continuous(0.0, 1.0, "x");
        let ctx = EmbedContext::new(vec![x], vec![], vec![(0.0, 1.0)]);
        assert!((compute_big_m(&[(0, 1.0)], 0.3, &ctx).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn hull_shrinks_the_constant() {
        // Hull of the points 0 and 0.4 in one dimension.
        let mut region = MioModel::new();
        let x = region.add_continuous(0.0, 1.0, "x");
        let l0 = region.add_continuous(0.0, f64::INFINITY, "l0");
        let l1 = region.add_continuous(0.0, f64::INFINITY, "l1");
        region.add_constraint([(x, 1.0), (l1, -0.4)], Sense::Eq, 0.0, "link");
        region.add_constraint([(l0, 1.0), (l1, 1.0)], Sense::Eq, 1.0, "convex");
        let oracle = RegionOracle::new(&region, vec![x]).unwrap();
        let ctx = EmbedContext::new(vec![x], vec![], vec![(0.0, 1.0)]).with_policy(BigMPolicy::Lp(oracle));
        assert!((compute_big_m(&[(0, 1.0)], 0.3, &ctx).unwrap() - 0.1).abs() < 1e-12);
    }
}
