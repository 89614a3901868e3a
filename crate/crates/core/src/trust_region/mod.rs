//! Data-driven trust regions: the convex hull of observed points, a union
//! of per-cluster hulls, and hull membership tests.
//!
//! A hull over points `z̄_i` is `Σ λ_i z̄_i = z`, `Σ λ_i = 1`, `λ ≥ 0`.
//! Each coordinate of `z` is either a model variable or a fixed value (the
//! context `w` when the hull spans the joint space).

mod kmeans;

use conlearn_mio::{LpSolver, LpStatus, MioModel, RowId, Sense, VarId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kmeans::{kmeans, Clustering};

#[derive(Debug, Error)]
pub enum TrustRegionError {
    #[error("point set is empty")]
    Empty,
    #[error("point {index} has {got} coordinates, expected {expected}")]
    Ragged { index: usize, expected: usize, got: usize },
    #[error("point {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("cannot form {k} clusters from {n} points")]
    TooManyClusters { k: usize, n: usize },
    #[error("clustering covers {got} points, expected {expected}")]
    ClusteringMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Lp(#[from] conlearn_mio::LpError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HullScope {
    /// Hull over `(x, w)`; the context coordinates are fixed to the query.
    #[default]
    Joint,
    /// Hull over `x` only.
    XOnly,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RegionPolicy {
    #[default]
    None,
    SingleHull,
    Union { k: usize, seed: u64 },
}

/// Observed points (joint rows `(x, w)`) and how to turn them into a
/// trust region.
#[derive(Clone, Debug, PartialEq)]
pub struct TrustRegionSpec {
    pub points: Vec<Vec<f64>>,
    pub policy: RegionPolicy,
    pub scope: HullScope,
}

impl TrustRegionSpec {
    pub fn none() -> Self {
        Self {
            points: Vec::new(),
            policy: RegionPolicy::None,
            scope: HullScope::Joint,
        }
    }

    pub fn single(points: Vec<Vec<f64>>, scope: HullScope) -> Self {
        Self {
            points,
            policy: RegionPolicy::SingleHull,
            scope,
        }
    }

    pub fn union(points: Vec<Vec<f64>>, k: usize, seed: u64, scope: HullScope) -> Self {
        Self {
            points,
            policy: RegionPolicy::Union { k, seed },
            scope,
        }
    }

    /// Points restricted to the hull's scope, given `n` decision features.
    pub fn scoped_points(&self, n: usize) -> Vec<Vec<f64>> {
        match self.scope {
            HullScope::Joint => self.points.clone(),
            HullScope::XOnly => self.points.iter().map(|p| p[..n].to_vec()).collect(),
        }
    }
}

/// Coordinate of the hull point: a model variable or a fixed value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HullTarget {
    Var(VarId),
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct HullArtifacts {
    /// Weight variable of each attached point, in `points` order.
    pub lambdas: Vec<VarId>,
    /// Index into the caller's point list of each attached point.
    pub point_index: Vec<usize>,
    pub rows: Vec<RowId>,
    /// Cluster indicator variables of a union of hulls.
    pub clusters: Vec<VarId>,
}

pub(crate) fn check_points(points: &[Vec<f64>]) -> Result<usize, TrustRegionError> {
    let d = points.first().ok_or(TrustRegionError::Empty)?.len();
    for (i, p) in points.iter().enumerate() {
        if p.len() != d {
            return Err(TrustRegionError::Ragged {
                index: i,
                expected: d,
                got: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(TrustRegionError::NonFinite(i));
        }
    }
    Ok(d)
}

/// Indices of the first occurrence of each distinct point, in order.
pub fn dedup_indices(points: &[Vec<f64>]) -> Vec<usize> {
    let cmp = |a: &usize, b: &usize| {
        let (pa, pb) = (&points[*a], &points[*b]);
        pa.iter()
            .zip(pb)
            .map(|(x, y)| (x + 0.0).total_cmp(&(y + 0.0)))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(b))
    };
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_unstable_by(cmp);
    let mut keep = vec![false; points.len()];
    for (k, &i) in order.iter().enumerate() {
        keep[i] = k == 0 || {
            let prev = &points[order[k - 1]];
            prev.iter().zip(&points[i]).any(|(x, y)| x != y)
        };
    }
    (0..points.len()).filter(|&i| keep[i]).collect()
}

fn link_rows(
    mio: &mut MioModel,
    points: &[Vec<f64>],
    keep: &[usize],
    lambdas: &[VarId],
    targets: &[HullTarget],
    prefix: &str,
) -> Vec<RowId> {
    let mut rows = Vec::with_capacity(targets.len() + 1);
    for (j, target) in targets.iter().enumerate() {
        let mut terms: Vec<(VarId, f64)> = keep
            .iter()
            .zip(lambdas)
            .map(|(&i, &l)| (l, points[i][j]))
            .filter(|&(_, a)| a != 0.0)
            .collect();
        let rhs = match *target {
            HullTarget::Var(v) => {
                terms.push((v, -1.0));
                0.0
            }
            HullTarget::Fixed(c) => c,
        };
        rows.push(mio.add_constraint(terms, Sense::Eq, rhs, format!("{prefix}_link{j}")));
    }
    rows
}

/// Restricts `targets` to the convex hull of `points`. Duplicate points are
/// attached once.
pub fn attach_hull(
    mio: &mut MioModel,
    points: &[Vec<f64>],
    targets: &[HullTarget],
    prefix: &str,
) -> Result<HullArtifacts, TrustRegionError> {
    let d = check_points(points)?;
    if d != targets.len() {
        return Err(TrustRegionError::Ragged {
            index: 0,
            expected: targets.len(),
            got: d,
        });
    }
    let keep = dedup_indices(points);
    let lambdas: Vec<VarId> = keep
        .iter()
        .map(|&i| mio.add_continuous(0.0, f64::INFINITY, format!("{prefix}_lambda{i}")))
        .collect();
    let mut rows = link_rows(mio, points, &keep, &lambdas, targets, prefix);
    rows.push(mio.add_constraint(
        lambdas.iter().map(|&l| (l, 1.0)),
        Sense::Eq,
        1.0,
        format!("{prefix}_convex"),
    ));
    Ok(HullArtifacts {
        lambdas,
        point_index: keep,
        rows,
        clusters: Vec::new(),
    })
}

/// Restricts `targets` to the union of the hulls of each cluster: one
/// binary `u_k` per cluster with `Σ_{i∈I_k} λ_i = u_k` and `Σ u_k = 1`.
pub fn attach_union_of_hulls(
    mio: &mut MioModel,
    points: &[Vec<f64>],
    targets: &[HullTarget],
    clustering: &Clustering,
    prefix: &str,
) -> Result<HullArtifacts, TrustRegionError> {
    let d = check_points(points)?;
    if d != targets.len() {
        return Err(TrustRegionError::Ragged {
            index: 0,
            expected: targets.len(),
            got: d,
        });
    }
    if clustering.assignment.len() != points.len() {
        return Err(TrustRegionError::ClusteringMismatch {
            expected: points.len(),
            got: clustering.assignment.len(),
        });
    }
    // Deduplicate within each cluster only, so cluster membership is kept.
    let mut keep = Vec::new();
    for c in 0..clustering.k {
        let members: Vec<usize> = (0..points.len()).filter(|&i| clustering.assignment[i] == c).collect();
        let sub: Vec<Vec<f64>> = members.iter().map(|&i| points[i].clone()).collect();
        keep.extend(dedup_indices(&sub).into_iter().map(|s| members[s]));
    }
    let lambdas: Vec<VarId> = keep
        .iter()
        .map(|&i| mio.add_continuous(0.0, f64::INFINITY, format!("{prefix}_lambda{i}")))
        .collect();
    let mut rows = link_rows(mio, points, &keep, &lambdas, targets, prefix);
    let clusters: Vec<VarId> = (0..clustering.k)
        .map(|c| mio.add_binary(format!("{prefix}_cluster{c}")))
        .collect();
    for (c, &u) in clusters.iter().enumerate() {
        let mut terms: Vec<(VarId, f64)> = keep
            .iter()
            .zip(&lambdas)
            .filter(|(&i, _)| clustering.assignment[i] == c)
            .map(|(_, &l)| (l, 1.0))
            .collect();
        terms.push((u, -1.0));
        rows.push(mio.add_constraint(terms, Sense::Eq, 0.0, format!("{prefix}_convex{c}")));
    }
    rows.push(mio.add_constraint(
        clusters.iter().map(|&u| (u, 1.0)),
        Sense::Eq,
        1.0,
        format!("{prefix}_one_cluster"),
    ));
    Ok(HullArtifacts {
        lambdas,
        point_index: keep,
        rows,
        clusters,
    })
}

/// Outcome of a hull membership test.
#[derive(Clone, Debug, PartialEq)]
pub enum Membership {
    /// Convex weights over the points that reproduce the query.
    Inside { lambda: Vec<f64>, residual: f64 },
    /// Smallest L1 distance from the query to the hull.
    Outside { distance: f64 },
}

impl Membership {
    pub fn is_member(&self) -> bool {
        matches!(self, Self::Inside { .. })
    }
}

/// Decides whether `query` lies in the convex hull of `points` by solving
/// the hull feasibility LP.
pub fn hull_membership(points: &[Vec<f64>], query: &[f64]) -> Result<Membership, TrustRegionError> {
    let d = check_points(points)?;
    if query.len() != d {
        return Err(TrustRegionError::Ragged {
            index: 0,
            expected: d,
            got: query.len(),
        });
    }
    let targets: Vec<HullTarget> = query.iter().map(|&q| HullTarget::Fixed(q)).collect();
    let mut mio = MioModel::new();
    let art = attach_hull(&mut mio, points, &targets, "h")?;
    let sol = LpSolver::new(&mio)?.solve()?;
    if sol.status == LpStatus::Optimal {
        let mut lambda = vec![0.0; points.len()];
        for (&i, &l) in art.point_index.iter().zip(&art.lambdas) {
            lambda[i] = sol.primal[l.0].max(0.0);
        }
        let residual = reconstruction_error(points, &lambda, query);
        return Ok(Membership::Inside { lambda, residual });
    }
    // L1 distance: add slack pairs to each linking row.
    let mut with_slack = MioModel::new();
    let mut terms_by_row: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); d];
    let mut lambdas = Vec::new();
    for &i in &art.point_index {
        let l = with_slack.add_continuous(0.0, f64::INFINITY, format!("l{i}"));
        lambdas.push(l);
        for j in 0..d {
            terms_by_row[j].push((l, points[i][j]));
        }
    }
    let mut obj = Vec::new();
    for (j, mut terms) in terms_by_row.into_iter().enumerate() {
        let sp = with_slack.add_continuous(0.0, f64::INFINITY, format!("sp{j}"));
        let sn = with_slack.add_continuous(0.0, f64::INFINITY, format!("sn{j}"));
        terms.push((sp, 1.0));
        terms.push((sn, -1.0));
        obj.push((sp, 1.0));
        obj.push((sn, 1.0));
        with_slack.add_constraint(terms, Sense::Eq, query[j], format!("link{j}"));
    }
    with_slack.add_constraint(lambdas.iter().map(|&l| (l, 1.0)), Sense::Eq, 1.0, "convex");
    with_slack.set_objective(obj, 0.0);
    let sol = LpSolver::new(&with_slack)?.solve()?;
    Ok(Membership::Outside {
        distance: sol.objective.max(0.0),
    })
}

/// Max-norm distance between `Σ λ_i z̄_i` and `query`.
pub fn reconstruction_error(points: &[Vec<f64>], lambda: &[f64], query: &[f64]) -> f64 {
    (0..query.len())
        .map(|j| {
            let v: f64 = points.iter().zip(lambda).map(|(p, l)| l * p[j]).sum();
            (v - query[j]).abs()
        })
        .fold(0.0, f64::max)
}
