//! Best-first branch and bound over binary variables.
//!
//! Nodes are ordered by their parent's LP bound, ties broken by creation
//! order, and evaluated lazily. Each child is warm-started from its parent's
//! optimal basis, so after a bound change the dual simplex usually needs only
//! a few pivots. Branching picks the most fractional binary (lowest index on
//! ties). Everything is deterministic for a given model.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::{Duration, Instant};

use crate::error::{LpError, MipError};
use crate::model::{MioModel, VarId};
use crate::simplex::{BasisSnapshot, Outcome, Simplex};

/// Values within this distance of 0 or 1 count as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MipStatus {
    /// Proven optimal within the requested gap.
    Optimal,
    /// Best solution found before the time or node limit.
    Incumbent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MipSolution {
    pub status: MipStatus,
    pub primal: Vec<f64>,
    pub objective: f64,
    /// Best remaining lower bound when the search stopped.
    pub bound: f64,
    pub nodes: usize,
    pub wall_time: Duration,
}

#[derive(Clone, Debug)]
pub struct MipOptions {
    /// Relative optimality gap; nodes are pruned once their bound is within
    /// `gap * max(1, |incumbent|)` of the incumbent.
    pub gap: f64,
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
}

impl Default for MipOptions {
    fn default() -> Self {
        Self {
            gap: 1e-9,
            time_limit: None,
            node_limit: None,
        }
    }
}

impl MipOptions {
    pub fn with_gap(gap: f64) -> Self {
        Self {
            gap,
            ..Self::default()
        }
    }
}

struct Node {
    bound: f64,
    id: usize,
    fixings: Vec<(usize, f64)>,
    basis: Rc<BasisSnapshot>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: the smallest bound (then id) must compare greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Solves `model` to optimality over its binary variables.
pub fn solve_mip(model: &MioModel, options: &MipOptions) -> Result<MipSolution, MipError> {
    if !(options.gap >= 0.0) {
        return Err(MipError::InvalidGap(options.gap));
    }
    model.validate().map_err(LpError::from)?;
    let start = Instant::now();
    let binaries: Vec<usize> = model.binaries().map(|v| v.0).collect();
    let base_bounds: Vec<(f64, f64)> = binaries
        .iter()
        .map(|&j| {
            let v = model.variable(VarId(j));
            (v.lower, v.upper)
        })
        .collect();
    let mut engine = Simplex::new(model);

    match engine.solve()? {
        Outcome::Infeasible => return Err(MipError::Infeasible),
        Outcome::Unbounded => return Err(MipError::Unbounded),
        Outcome::Optimal => {}
    }
    let root_basis = Rc::new(engine.snapshot());
    let root_bound = engine.objective_value();

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: root_bound,
        id: 0,
        fixings: Vec::new(),
        basis: root_basis,
    });
    let mut next_id = 1usize;
    let mut nodes = 0usize;
    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut first = true;

    let prune_tol = |inc: f64| (options.gap * inc.abs().max(1.0)).max(1e-9);

    while let Some(node) = heap.pop() {
        if let Some((_, inc)) = &incumbent {
            if node.bound >= inc - prune_tol(*inc) {
                continue;
            }
        }
        let limit_hit = options.time_limit.is_some_and(|t| start.elapsed() >= t)
            || options.node_limit.is_some_and(|n| nodes >= n);
        if limit_hit {
            heap.push(node);
            let bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
            let incumbent = incumbent.map(|(primal, objective)| {
                Box::new(MipSolution {
                    status: MipStatus::Incumbent,
                    primal,
                    objective,
                    bound,
                    nodes,
                    wall_time: start.elapsed(),
                })
            });
            return Err(MipError::TimeLimit { nodes, incumbent });
        }
        nodes += 1;

        if !first {
            for (k, &j) in binaries.iter().enumerate() {
                engine.set_var_bounds(j, base_bounds[k].0, base_bounds[k].1);
            }
            for &(j, val) in &node.fixings {
                engine.set_var_bounds(j, val, val);
            }
            engine.restore(&node.basis)?;
            match engine.solve()? {
                Outcome::Optimal => {}
                Outcome::Infeasible => continue,
                Outcome::Unbounded => return Err(MipError::Unbounded),
            }
        }
        first = false;
        let obj = engine.objective_value();
        if let Some((_, inc)) = &incumbent {
            if obj >= inc - prune_tol(*inc) {
                continue;
            }
        }
        let x = engine.structural_values();

        let mut branch = None;
        let mut best_frac = INTEGRALITY_TOL;
        for &j in &binaries {
            let f = x[j] - x[j].floor();
            let frac = f.min(1.0 - f);
            if frac > best_frac {
                best_frac = frac;
                branch = Some(j);
            }
        }

        match branch {
            None => {
                let (primal, value) = polish(&mut engine, &binaries, &x).unwrap_or((x, obj));
                if incumbent.as_ref().map_or(true, |(_, inc)| value < *inc) {
                    incumbent = Some((primal, value));
                }
            }
            Some(j) => {
                let basis = Rc::new(engine.snapshot());
                for val in [0.0, 1.0] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((j, val));
                    heap.push(Node {
                        bound: obj,
                        id: next_id,
                        fixings,
                        basis: Rc::clone(&basis),
                    });
                    next_id += 1;
                }
            }
        }
    }

    match incumbent {
        Some((primal, objective)) => Ok(MipSolution {
            status: MipStatus::Optimal,
            primal,
            objective,
            bound: objective,
            nodes,
            wall_time: start.elapsed(),
        }),
        None => Err(MipError::Infeasible),
    }
}

/// Fixes binaries to their rounded values and re-solves so the continuous
/// part is exactly consistent with integral binaries.
fn polish(engine: &mut Simplex, binaries: &[usize], x: &[f64]) -> Option<(Vec<f64>, f64)> {
    if binaries.is_empty() {
        return None;
    }
    let saved: Vec<(f64, f64)> = binaries.iter().map(|&j| engine.var_bounds(j)).collect();
    for &j in binaries {
        let r = x[j].round();
        engine.set_var_bounds(j, r, r);
    }
    let result = match engine.solve() {
        Ok(Outcome::Optimal) => {
            let mut p = engine.structural_values();
            for &j in binaries {
                p[j] = p[j].round();
            }
            Some((p, engine.objective_value()))
        }
        _ => None,
    };
    for (&j, &(l, u)) in binaries.iter().zip(&saved) {
        engine.set_var_bounds(j, l, u);
    }
    result
}
