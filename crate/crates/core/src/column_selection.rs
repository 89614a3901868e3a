//! Column selection for hull-constrained linear problems.
//!
//! The restricted master keeps hull weights for a pool of points only. After
//! each solve, every point outside the pool is priced with the duals of the
//! linking rows `π` and of the convexity row `ρ`: its weight column has
//! reduced cost `−πᵀz̄ − ρ`. Points with negative reduced cost enter the pool
//! until none remain, at which point the master is optimal for the full hull.
//!
//! A pool whose hull misses the feasible set makes the first master
//! infeasible, so the master starts with elastic slacks on the hull rows and
//! first drives their sum to zero by the same pricing.

use std::path::Path;
use std::time::{Duration, Instant};

use conlearn_mio::{LpError, LpSolver, LpStatus, MioModel, MipSolution, MipStatus, RowId, Sense, VarId};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::trust_region::{attach_hull, check_points, dedup_indices, HullTarget, TrustRegionError};

#[derive(Debug, Error)]
pub enum ColumnSelectionError {
    #[error("column selection needs a continuous model; `{0}` is binary")]
    BinaryVariablesPresent(String),
    #[error("problem is infeasible over the full hull")]
    Infeasible,
    #[error("problem is unbounded")]
    Unbounded,
    #[error(transparent)]
    TrustRegion(#[from] TrustRegionError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("could not write {path}: {message}")]
    Output { path: String, message: String },
}

/// A continuous model whose `targets` must lie in the hull of `points`.
#[derive(Clone, Debug)]
pub struct HullProblem {
    pub model: MioModel,
    pub points: Vec<Vec<f64>>,
    pub targets: Vec<HullTarget>,
}

#[derive(Clone, Debug)]
pub struct ColumnSelectionOptions {
    pub initial_pool: usize,
    /// Columns added per iteration, most negative first.
    pub batch: usize,
    /// Pricing stops once every reduced cost is at least `−tolerance`.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for ColumnSelectionOptions {
    fn default() -> Self {
        Self {
            initial_pool: 100,
            batch: 1,
            tolerance: 1e-7,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PricingResult {
    pub index: usize,
    pub reduced_cost: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Minimizing the elastic slacks of the hull rows.
    Feasibility,
    Optimality,
}

/// One master solve and the columns it admitted.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PricingIteration {
    pub phase: Phase,
    pub objective: f64,
    pub min_reduced_cost: Option<f64>,
    pub selected: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct ColumnSelectionOutcome {
    /// Values of the original model's variables.
    pub solution: MipSolution,
    /// Pool at termination, in order of admission.
    pub pool: Vec<usize>,
    /// Weight of each pool point.
    pub lambda: Vec<f64>,
    pub audit: Vec<PricingIteration>,
}

impl ColumnSelectionOutcome {
    /// Number of iterations that admitted at least one column.
    pub fn pricing_iterations(&self) -> usize {
        self.audit.iter().filter(|a| !a.selected.is_empty()).count()
    }
}

/// Reduced cost of a weight column for point `z` given the linking-row duals
/// and the convexity-row dual.
pub fn reduced_cost(z: &[f64], link_duals: &[f64], convexity_dual: f64) -> f64 {
    -z.iter().zip(link_duals).map(|(a, p)| a * p).sum::<f64>() - convexity_dual
}

/// Prices every point not in the pool. Sorted by reduced cost, ties by
/// lowest index.
pub fn price_candidates(
    points: &[Vec<f64>],
    in_pool: &[bool],
    link_duals: &[f64],
    convexity_dual: f64,
) -> Vec<PricingResult> {
    let mut out: Vec<PricingResult> = (0..points.len())
        .into_par_iter()
        .filter(|&i| !in_pool[i])
        .map(|i| PricingResult {
            index: i,
            reduced_cost: reduced_cost(&points[i], link_duals, convexity_dual),
        })
        .collect();
    out.sort_by(|a, b| a.reduced_cost.total_cmp(&b.reduced_cost).then(a.index.cmp(&b.index)));
    out
}

/// The `batch` most negative reduced costs below `−tolerance`, plus the
/// overall minimum. Same order as [`price_candidates`] without sorting the
/// whole candidate set.
fn most_negative(
    points: &[Vec<f64>],
    in_pool: &[bool],
    link_duals: &[f64],
    convexity_dual: f64,
    tolerance: f64,
    batch: usize,
) -> (Option<f64>, Vec<usize>) {
    let order = |a: &PricingResult, b: &PricingResult| a.reduced_cost.total_cmp(&b.reduced_cost).then(a.index.cmp(&b.index));
    let mut min = None::<f64>;
    let mut negative = Vec::new();
    for (i, z) in points.iter().enumerate() {
        if in_pool[i] {
            continue;
        }
        let rc = reduced_cost(z, link_duals, convexity_dual);
        min = Some(min.map_or(rc, |m| m.min(rc)));
        if rc < -tolerance {
            negative.push(PricingResult { index: i, reduced_cost: rc });
        }
    }
    if negative.len() > batch {
        negative.select_nth_unstable_by(batch - 1, order);
        negative.truncate(batch);
    }
    negative.sort_by(order);
    (min, negative.into_iter().map(|p| p.index).collect())
}

fn check_continuous(model: &MioModel) -> Result<(), ColumnSelectionError> {
    match model.binaries().next() {
        Some(v) => Err(ColumnSelectionError::BinaryVariablesPresent(model.variable(v).name.clone())),
        None => Ok(()),
    }
}

fn wrap(primal: Vec<f64>, objective: f64, elapsed: Duration) -> MipSolution {
    MipSolution {
        status: MipStatus::Optimal,
        primal,
        objective,
        bound: objective,
        nodes: 0,
        wall_time: elapsed,
    }
}

/// Solves the problem with every point's weight in the model.
pub fn solve_full_hull(problem: &HullProblem) -> Result<MipSolution, ColumnSelectionError> {
    check_continuous(&problem.model)?;
    let start = Instant::now();
    let mut m = problem.model.clone();
    attach_hull(&mut m, &problem.points, &problem.targets, "hull")?;
    let sol = LpSolver::new(&m)?.solve()?;
    match sol.status {
        LpStatus::Optimal => Ok(wrap(
            sol.primal[..problem.model.num_vars()].to_vec(),
            sol.objective,
            start.elapsed(),
        )),
        LpStatus::Infeasible => Err(ColumnSelectionError::Infeasible),
        LpStatus::Unbounded => Err(ColumnSelectionError::Unbounded),
    }
}

struct Master {
    solver: LpSolver,
    link_rows: Vec<RowId>,
    convexity: RowId,
    slacks: Vec<VarId>,
    lambdas: Vec<VarId>,
}

impl Master {
    fn column(&self, z: &[f64]) -> Vec<(RowId, f64)> {
        let mut e: Vec<(RowId, f64)> = self
            .link_rows
            .iter()
            .zip(z)
            .filter(|&(_, &a)| a != 0.0)
            .map(|(&r, &a)| (r, a))
            .collect();
        e.push((self.convexity, 1.0));
        e
    }
}

fn build_master(problem: &HullProblem, pool: &[usize]) -> Result<Master, ColumnSelectionError> {
    let mut m = problem.model.clone();
    let lambdas: Vec<VarId> = pool
        .iter()
        .map(|&i| m.add_continuous(0.0, f64::INFINITY, format!("hull_lambda{i}")))
        .collect();
    let mut slacks = Vec::new();
    let mut elastic = |m: &mut MioModel, terms: &mut Vec<(VarId, f64)>, name: &str| {
        let up = m.add_continuous(0.0, f64::INFINITY, format!("{name}_up"));
        let down = m.add_continuous(0.0, f64::INFINITY, format!("{name}_down"));
        terms.push((up, 1.0));
        terms.push((down, -1.0));
        slacks.push(up);
        slacks.push(down);
    };
    let mut link_rows = Vec::with_capacity(problem.targets.len());
    for (j, target) in problem.targets.iter().enumerate() {
        let mut terms: Vec<(VarId, f64)> = pool
            .iter()
            .zip(&lambdas)
            .map(|(&i, &l)| (l, problem.points[i][j]))
            .filter(|&(_, a)| a != 0.0)
            .collect();
        let rhs = match *target {
            HullTarget::Var(v) => {
                terms.push((v, -1.0));
                0.0
            }
            HullTarget::Fixed(c) => c,
        };
        elastic(&mut m, &mut terms, &format!("hull_slack{j}"));
        link_rows.push(m.add_constraint(terms, Sense::Eq, rhs, format!("hull_link{j}")));
    }
    let mut terms: Vec<(VarId, f64)> = lambdas.iter().map(|&l| (l, 1.0)).collect();
    elastic(&mut m, &mut terms, "hull_slack_convex");
    let convexity = m.add_constraint(terms, Sense::Eq, 1.0, "hull_convex");
    m.set_objective(slacks.iter().map(|&s| (s, 1.0)), 0.0);
    Ok(Master {
        solver: LpSolver::new(&m)?,
        link_rows,
        convexity,
        slacks,
        lambdas,
    })
}

/// Solves `problem` by growing a pool of hull points from a seeded random
/// subset of `options.initial_pool` points.
pub fn solve_with_column_selection(
    problem: &HullProblem,
    options: &ColumnSelectionOptions,
) -> Result<ColumnSelectionOutcome, ColumnSelectionError> {
    check_continuous(&problem.model)?;
    let d = check_points(&problem.points)?;
    if d != problem.targets.len() {
        return Err(TrustRegionError::Ragged {
            index: 0,
            expected: problem.targets.len(),
            got: d,
        }
        .into());
    }
    let start = Instant::now();
    // Duplicates need no filtering: a copy of a pool point prices at the
    // pool column's reduced cost, which is nonnegative at optimality.
    let total = problem.points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let size = options.initial_pool.clamp(1, total);
    let mut pool: Vec<usize> = sample(&mut rng, total, size).into_vec();
    pool.sort_unstable();
    let mut in_pool = vec![false; total];
    for &i in &pool {
        in_pool[i] = true;
    }
    let mut master = build_master(problem, &pool)?;
    let mut phase = Phase::Feasibility;
    let mut audit = Vec::new();
    let batch = options.batch.max(1);
    let objective = problem.model.objective();
    loop {
        let sol = master.solver.solve()?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(ColumnSelectionError::Infeasible),
            LpStatus::Unbounded => return Err(ColumnSelectionError::Unbounded),
        }
        let link: Vec<f64> = master.link_rows.iter().map(|r| sol.duals[r.0]).collect();
        let rho = sol.duals[master.convexity.0];
        let (min_rc, selected) = most_negative(&problem.points, &in_pool, &link, rho, options.tolerance, batch);
        audit.push(PricingIteration {
            phase,
            objective: sol.objective,
            min_reduced_cost: min_rc,
            selected: selected.clone(),
        });
        if !selected.is_empty() {
            for i in selected {
                let col = master.column(&problem.points[i]);
                let v = master.solver.add_column(&col, 0.0, f64::INFINITY, 0.0);
                master.lambdas.push(v);
                pool.push(i);
                in_pool[i] = true;
            }
            continue;
        }
        match phase {
            Phase::Feasibility => {
                if sol.objective > 1e-9 {
                    return Err(ColumnSelectionError::Infeasible);
                }
                for &s in &master.slacks {
                    master.solver.set_bounds(s, 0.0, 0.0);
                }
                master.solver.set_objective(&objective.terms, objective.constant);
                phase = Phase::Optimality;
            }
            Phase::Optimality => {
                let lambda = master.lambdas.iter().map(|v| sol.primal[v.0].max(0.0)).collect();
                return Ok(ColumnSelectionOutcome {
                    solution: wrap(
                        sol.primal[..problem.model.num_vars()].to_vec(),
                        sol.objective,
                        start.elapsed(),
                    ),
                    pool,
                    lambda,
                    audit,
                });
            }
        }
    }
}

/// Random instance of `min cᵀx` s.t. `Σx ≤ t`, `Ax ≤ b`, `x ∈ CH(Z)` with
/// `n` features, `k` learned rows and `samples` standard normal points.
pub fn scaling_instance(n: usize, k: usize, samples: usize, seed: u64) -> HullProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..samples)
        .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let mean: Vec<f64> = (0..n)
        .map(|j| points.iter().map(|p| p[j]).sum::<f64>() / samples as f64)
        .collect();
    let mut model = MioModel::new();
    let x: Vec<VarId> = (0..n)
        .map(|j| model.add_continuous(f64::NEG_INFINITY, f64::INFINITY, format!("x{j}")))
        .collect();
    let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    model.set_objective(x.iter().copied().zip(c), 0.0);
    // The sample mean lies in the hull and strictly satisfies every row.
    let t = mean.iter().sum::<f64>() + 0.5 * (n as f64).sqrt();
    model.add_constraint(x.iter().map(|&v| (v, 1.0)), Sense::Le, t, "known_sum");
    for r in 0..k {
        let a: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let b = a.iter().zip(&mean).map(|(a, m)| a * m).sum::<f64>() + rng.gen_range(0.1..1.0);
        model.add_constraint(x.iter().copied().zip(a), Sense::Le, b, format!("learned{r}"));
    }
    HullProblem {
        model,
        targets: x.into_iter().map(HullTarget::Var).collect(),
        points,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    Full,
    ColumnSelection,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    #[serde(rename = "N")]
    pub samples: usize,
    pub mode: SolveMode,
    pub seed: u64,
    pub objective: f64,
    pub pool_size: usize,
    #[serde(skip)]
    pub wall_seconds: f64,
}

#[derive(Serialize)]
struct TimingRow {
    #[serde(rename = "N")]
    samples: usize,
    mode: SolveMode,
    seed: u64,
    wall_seconds: f64,
}

/// Solves [`scaling_instance`] for every sample count and seed with and
/// without column selection.
pub fn scalability_experiment(
    n: usize,
    k: usize,
    sample_counts: &[usize],
    seeds: &[u64],
    options: &ColumnSelectionOptions,
) -> Result<Vec<ScalingRow>, ColumnSelectionError> {
    let mut rows = Vec::new();
    for &samples in sample_counts {
        for &seed in seeds {
            let problem = scaling_instance(n, k, samples, seed);
            let t0 = Instant::now();
            let full = solve_full_hull(&problem)?;
            rows.push(ScalingRow {
                samples,
                mode: SolveMode::Full,
                seed,
                objective: full.objective,
                pool_size: dedup_indices(&problem.points).len(),
                wall_seconds: t0.elapsed().as_secs_f64(),
            });
            let t0 = Instant::now();
            let cs = solve_with_column_selection(&problem, &ColumnSelectionOptions { seed, ..options.clone() })?;
            rows.push(ScalingRow {
                samples,
                mode: SolveMode::ColumnSelection,
                seed,
                objective: cs.solution.objective,
                pool_size: cs.pool.len(),
                wall_seconds: t0.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(rows)
}

/// Writes the deterministic result table to `path` and the wall times to a
/// sibling `<stem>_timing.csv`.
pub fn write_scaling_csv(rows: &[ScalingRow], path: &Path) -> Result<(), ColumnSelectionError> {
    let err = |p: &Path, e: csv::Error| ColumnSelectionError::Output {
        path: p.display().to_string(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| err(path, e))?;
    }
    w.flush().map_err(|e| err(path, e.into()))?;
    let timing = crate::timing_path(path);
    let mut w = csv::Writer::from_path(&timing).map_err(|e| err(&timing, e))?;
    for r in rows {
        w.serialize(TimingRow {
            samples: r.samples,
            mode: r.mode,
            seed: r.seed,
            wall_seconds: r.wall_seconds,
        })
        .map_err(|e| err(&timing, e))?;
    }
    w.flush().map_err(|e| err(&timing, e.into()))?;
    Ok(())
}
