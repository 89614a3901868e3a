//! Solving a problem as independent pieces: one subproblem per data cluster,
//! or one LP per admissible leaf of a single tree constraint.

use std::time::Instant;

use conlearn_mio::{solve_lp, LpStatus, MioModel, MipOptions, Sense};
use rayon::prelude::*;
use serde::Serialize;

use super::{add_base, attach_region, scoped, solve, OutcomeReport, PipelineError, SolveReport, Timing};
use super::ConceptualProblem;
use crate::embed::{leaf_polyhedron, reachable_leaves, EmbedContext, Role};
use crate::model_ir::ModelShape;
use crate::trust_region::{kmeans, RegionPolicy, TrustRegionSpec};

fn pool(threads: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| PipelineError::ThreadPool(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterSolve {
    pub cluster: usize,
    pub size: usize,
    /// `None` when the cluster's subproblem is infeasible.
    pub objective: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusteredReport {
    pub best: SolveReport,
    pub clusters: Vec<ClusterSolve>,
    /// Longest single cluster solve: the wall time with one worker per
    /// cluster.
    pub max_cluster_seconds: f64,
    pub total_seconds: f64,
}

/// Clusters the trust-region points into `k` groups and solves one
/// subproblem per cluster with that cluster's hull as its trust region.
/// Returns the best solution; ties go to the lowest cluster index.
pub fn solve_clustered(
    problem: &ConceptualProblem,
    k: usize,
    seed: u64,
    threads: usize,
    options: &MipOptions,
) -> Result<ClusteredReport, PipelineError> {
    if problem.trust_region.points.is_empty() {
        return Err(PipelineError::InvalidProblem("clustered solve needs trust-region points".into()));
    }
    let start = Instant::now();
    let clustering = kmeans(&scoped(problem), k, seed)?;
    let members: Vec<Vec<usize>> = (0..k).map(|c| clustering.members(c)).collect();
    let run = |c: usize| {
        let mut sub = problem.clone();
        sub.trust_region = TrustRegionSpec {
            points: members[c].iter().map(|&i| problem.trust_region.points[i].clone()).collect(),
            policy: RegionPolicy::SingleHull,
            scope: problem.trust_region.scope,
        };
        let t = Instant::now();
        let r = solve(&sub, options);
        (r, t.elapsed().as_secs_f64())
    };
    let results: Vec<_> = pool(threads)?.install(|| (0..k).into_par_iter().map(run).collect());

    let mut clusters = Vec::with_capacity(k);
    let mut best: Option<SolveReport> = None;
    for (c, (r, seconds)) in results.into_iter().enumerate() {
        let objective = match r {
            Ok(mut rep) => {
                let obj = rep.objective;
                if best.as_ref().map_or(true, |b| obj < b.objective) {
                    rep.cluster = Some(c);
                    best = Some(rep);
                }
                Some(obj)
            }
            Err(PipelineError::Infeasible) => None,
            Err(e) => return Err(e),
        };
        clusters.push(ClusterSolve {
            cluster: c,
            size: members[c].len(),
            objective,
            seconds,
        });
    }
    let best = best.ok_or(PipelineError::Infeasible)?;
    Ok(ClusteredReport {
        best,
        max_cluster_seconds: clusters.iter().map(|c| c.seconds).fold(0.0, f64::max),
        clusters,
        total_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeafSolve {
    pub leaf: usize,
    pub prediction: f64,
    /// `None` when the leaf region does not meet the other constraints.
    pub objective: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeafReport {
    pub best: SolveReport,
    pub leaf: usize,
    /// One entry per reachable leaf whose prediction satisfies the bound.
    pub leaves: Vec<LeafSolve>,
    pub total_seconds: f64,
}

/// Solves a problem whose only learned part is a bound on one tree by
/// solving one LP per leaf that satisfies the bound.
pub fn solve_tree_by_leaves(
    problem: &ConceptualProblem,
    threads: usize,
) -> Result<LeafReport, PipelineError> {
    problem.validate()?;
    let refuse = |m: &str| Err(PipelineError::NotDecomposable(m.into()));
    let [learned] = &problem.learned[..] else {
        return refuse("needs exactly one learned outcome");
    };
    let ModelShape::Tree(tree) = &learned.model.shape else {
        return refuse("the learned outcome must be a single tree");
    };
    let admits: Box<dyn Fn(f64) -> bool> = match (learned.binding.role, learned.binding.violation) {
        (Role::Upper(t), None) => Box::new(move |p| p <= t),
        (Role::Lower(t), None) => Box::new(move |p| p >= t),
        _ => return refuse("the tree must carry a plain upper or lower bound"),
    };
    if problem.extra.iter().any(|v| v.binary) {
        return refuse("all decision variables must be continuous");
    }
    if matches!(problem.trust_region.policy, RegionPolicy::Union { .. }) {
        return refuse("a union trust region needs binaries");
    }
    let start = Instant::now();
    let mut base = MioModel::new();
    let (x, extra) = add_base(&mut base, problem);
    let var = |j: usize| if j < x.len() { x[j] } else { extra[j - x.len()] };
    base.set_objective(
        problem.objective.iter().map(|&(j, c)| (var(j), c)),
        problem.objective_constant,
    );
    attach_region(&mut base, problem, &x, None)?;
    let ctx = EmbedContext::new(x.clone(), problem.w.clone(), problem.x_bounds.clone());
    let leaves: Vec<usize> = reachable_leaves(tree, &ctx)
        .into_iter()
        .filter(|&i| admits(tree.leaves()[i].prediction))
        .collect();

    type Row = (Vec<(conlearn_mio::VarId, f64)>, f64, String);
    let rows: Vec<Vec<Row>> = leaves
        .iter()
        .map(|&leaf| {
            leaf_polyhedron(tree, leaf, &ctx)
                .into_iter()
                .map(|r| (ctx.vars(&r.terms), r.rhs, format!("leaf{leaf}_s{}", r.split)))
                .collect()
        })
        .collect();
    let run = |rows: &Vec<Row>| {
        let t = Instant::now();
        let mut m = base.clone();
        for (terms, rhs, name) in rows {
            m.add_constraint(terms.iter().copied(), Sense::Le, *rhs, name.clone());
        }
        (solve_lp(&m), t.elapsed().as_secs_f64())
    };
    let results: Vec<_> = pool(threads)?.install(|| rows.par_iter().map(run).collect());

    let mut solves = Vec::with_capacity(leaves.len());
    let mut best: Option<(usize, conlearn_mio::LpSolution, f64)> = None;
    for (&leaf, (r, seconds)) in leaves.iter().zip(results) {
        let sol = r.map_err(|e| PipelineError::Mip(e.into()))?;
        let objective = match sol.status {
            LpStatus::Optimal => Some(sol.objective),
            LpStatus::Infeasible => None,
            LpStatus::Unbounded => return Err(PipelineError::Unbounded),
        };
        if let Some(obj) = objective {
            if best.as_ref().map_or(true, |b| obj < b.1.objective) {
                best = Some((leaf, sol, seconds));
            }
        }
        solves.push(LeafSolve {
            leaf,
            prediction: tree.leaves()[leaf].prediction,
            objective,
            seconds,
        });
    }
    let (leaf, sol, _) = best.ok_or(PipelineError::Infeasible)?;
    let xs: Vec<f64> = x.iter().map(|v| sol.primal[v.0]).collect();
    let embedded = tree.leaves()[leaf].prediction;
    let oracle = learned.model.predict(&xs, &problem.w)?;
    let total = start.elapsed().as_secs_f64();
    Ok(LeafReport {
        best: SolveReport {
            optimal: true,
            objective: sol.objective,
            extra: extra.iter().map(|v| sol.primal[v.0]).collect(),
            x: xs,
            outcomes: vec![OutcomeReport {
                outcome: learned.binding.outcome.clone(),
                embedded,
                oracle,
                gap: (embedded - oracle).abs(),
            }],
            cluster: None,
            nodes: 0,
            timing: Timing {
                assemble_seconds: 0.0,
                solve_seconds: total,
            },
        },
        leaf,
        leaves: solves,
        total_seconds: total,
    })
}
