//! End-to-end assembly of an optimization problem with learned outcomes.
//!
//! A [`ConceptualProblem`] lists decision variables, known rows and
//! objective terms, the trained models whose outcomes are constrained or
//! priced, and a trust region. [`assemble`] turns it into a [`MioModel`]:
//! known rows first, then each learned outcome, then the trust region.
//! Big-M constants are computed over the known rows and the trust region.

mod decompose;
mod evaluate;
pub mod synthetic;

use std::time::Instant;

use conlearn_mio::{solve_mip, MioModel, MipError, MipOptions, MipStatus, Sense, VarId, VarKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::{bind_outcome, embed_model, BigMPolicy, EmbedContext, EmbedError, EmbeddingArtifacts, OutcomeBinding, RegionOracle};
use crate::model_ir::{FeatureSpace, ModelIrError, PredictiveModel};
use crate::trainers::TrainError;
use crate::trust_region::{
    attach_hull, attach_union_of_hulls, kmeans, Clustering, HullArtifacts, HullScope, HullTarget, RegionPolicy,
    TrustRegionError, TrustRegionSpec,
};

pub use decompose::{solve_clustered, solve_tree_by_leaves, ClusterSolve, ClusteredReport, LeafReport, LeafSolve};
pub use evaluate::{
    evaluate_prescriptions, leaf_count_experiment, sample_costs, write_evaluation_csv, write_leaf_depth_csv,
    Evaluation, EvaluationRow, LeafDepthRow,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("problem is infeasible")]
    Infeasible,
    #[error("problem is unbounded")]
    Unbounded,
    #[error("leaf decomposition does not apply: {0}")]
    NotDecomposable(String),
    #[error("solver stopped at its time limit without a solution")]
    NoSolution,
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    TrustRegion(#[from] TrustRegionError),
    #[error(transparent)]
    Mip(MipError),
    #[error(transparent)]
    ModelIr(#[from] ModelIrError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("could not write {path}: {message}")]
    Output { path: String, message: String },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl From<MipError> for PipelineError {
    fn from(e: MipError) -> Self {
        match e {
            MipError::Infeasible => Self::Infeasible,
            MipError::Unbounded => Self::Unbounded,
            other => Self::Mip(other),
        }
    }
}

/// A decision variable beyond the model features (flows, indicators).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionVar {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub binary: bool,
}

impl DecisionVar {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
            binary: false,
        }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            lower: 0.0,
            upper: 1.0,
            binary: true,
        }
    }
}

/// A known row over problem variables: indices below `n` are the decision
/// features, the rest index [`ConceptualProblem::extra`].
#[derive(Clone, Debug, PartialEq)]
pub struct KnownRow {
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnedOutcome {
    pub model: PredictiveModel,
    pub binding: OutcomeBinding,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BigMMode {
    /// Interval arithmetic over the decision box.
    Interval,
    /// LPs over the known rows and the trust region.
    #[default]
    Region,
}

#[derive(Clone, Debug)]
pub struct ConceptualProblem {
    /// Names of the decision features `x` and context features `w`.
    pub features: FeatureSpace,
    /// Box on `x`; must be finite so every big-M is finite.
    pub x_bounds: Vec<(f64, f64)>,
    pub w: Vec<f64>,
    pub extra: Vec<DecisionVar>,
    pub known: Vec<KnownRow>,
    /// Linear objective over problem variables (minimized).
    pub objective: Vec<(usize, f64)>,
    pub objective_constant: f64,
    pub learned: Vec<LearnedOutcome>,
    pub trust_region: TrustRegionSpec,
    pub big_m: BigMMode,
}

impl ConceptualProblem {
    pub fn new(features: FeatureSpace, x_bounds: Vec<(f64, f64)>, w: Vec<f64>) -> Self {
        Self {
            features,
            x_bounds,
            w,
            extra: Vec::new(),
            known: Vec::new(),
            objective: Vec::new(),
            objective_constant: 0.0,
            learned: Vec::new(),
            trust_region: TrustRegionSpec::none(),
            big_m: BigMMode::default(),
        }
    }

    pub fn n(&self) -> usize {
        self.features.n()
    }

    pub fn num_vars(&self) -> usize {
        self.n() + self.extra.len()
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::InvalidProblem(m));
        let n = self.n();
        if self.x_bounds.len() != n {
            return bad(format!("{} bounds for {n} decision features", self.x_bounds.len()));
        }
        if let Some(j) = self
            .x_bounds
            .iter()
            .position(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
        {
            return bad(format!("bounds of `{}` must be finite with lower ≤ upper", self.features.x_names[j]));
        }
        if self.w.len() != self.features.p() {
            return bad(format!("{} context values for {} context features", self.w.len(), self.features.p()));
        }
        let nv = self.num_vars();
        let check_terms = |terms: &[(usize, f64)], what: &str| -> Result<(), PipelineError> {
            match terms.iter().find(|&&(j, a)| j >= nv || !a.is_finite()) {
                Some(&(j, _)) => Err(PipelineError::InvalidProblem(format!(
                    "{what} references variable {j} or has a non-finite coefficient"
                ))),
                None => Ok(()),
            }
        };
        for r in &self.known {
            check_terms(&r.terms, &format!("row `{}`", r.name))?;
            if !r.rhs.is_finite() {
                return bad(format!("row `{}` has a non-finite right-hand side", r.name));
            }
        }
        check_terms(&self.objective, "objective")?;
        for l in &self.learned {
            l.model.validate()?;
            l.binding.validate()?;
            let f = &l.model.features;
            if f.x_names != self.features.x_names || f.w_names != self.features.w_names {
                return bad(format!("model for `{}` uses different features", l.binding.outcome));
            }
        }
        let priced = self
            .learned
            .iter()
            .any(|l| matches!(l.binding.role, crate::embed::Role::Objective(_)));
        if self.objective.is_empty() && !priced {
            return bad("no objective terms and no learned objective".into());
        }
        if let RegionPolicy::Union { k: 0, .. } = self.trust_region.policy {
            return bad("union trust region needs at least one cluster".into());
        }
        if self.trust_region.policy != RegionPolicy::None {
            let d = match self.trust_region.scope {
                HullScope::Joint => self.features.dim(),
                HullScope::XOnly => n,
            };
            if self.trust_region.points.is_empty() {
                return bad("trust region has no points".into());
            }
            if let Some(i) = self.trust_region.points.iter().position(|p| p.len() < d) {
                return bad(format!("trust region point {i} has fewer than {d} coordinates"));
            }
        }
        Ok(())
    }
}

/// The assembled model and where everything landed in it.
#[derive(Debug)]
pub struct Assembled {
    pub model: MioModel,
    pub x: Vec<VarId>,
    pub extra: Vec<VarId>,
    pub outcomes: Vec<EmbeddingArtifacts>,
    pub hull: Option<HullArtifacts>,
    pub clustering: Option<Clustering>,
}

fn sanitize(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    if s.is_empty() {
        "y".into()
    } else {
        s
    }
}

/// Adds the decision variables and known rows; returns the `x` and extra
/// variable ids.
fn add_base(mio: &mut MioModel, problem: &ConceptualProblem) -> (Vec<VarId>, Vec<VarId>) {
    let x: Vec<VarId> = problem
        .features
        .x_names
        .iter()
        .zip(&problem.x_bounds)
        .map(|(name, &(lo, hi))| mio.add_continuous(lo, hi, sanitize(name)))
        .collect();
    let extra: Vec<VarId> = problem
        .extra
        .iter()
        .map(|v| {
            let kind = if v.binary { VarKind::Binary } else { VarKind::Continuous };
            mio.add_var(kind, v.lower, v.upper, sanitize(&v.name))
        })
        .collect();
    let var = |j: usize| if j < x.len() { x[j] } else { extra[j - x.len()] };
    for r in &problem.known {
        let terms: Vec<(VarId, f64)> = r.terms.iter().map(|&(j, a)| (var(j), a)).collect();
        mio.add_constraint(terms, r.sense, r.rhs, sanitize(&r.name));
    }
    (x, extra)
}

fn hull_targets(problem: &ConceptualProblem, x: &[VarId]) -> Vec<HullTarget> {
    let mut t: Vec<HullTarget> = x.iter().map(|&v| HullTarget::Var(v)).collect();
    if problem.trust_region.scope == HullScope::Joint {
        t.extend(problem.w.iter().map(|&c| HullTarget::Fixed(c)));
    }
    t
}

fn scoped(problem: &ConceptualProblem) -> Vec<Vec<f64>> {
    let d = match problem.trust_region.scope {
        HullScope::Joint => problem.features.dim(),
        HullScope::XOnly => problem.n(),
    };
    problem.trust_region.points.iter().map(|p| p[..d].to_vec()).collect()
}

fn attach_region(
    mio: &mut MioModel,
    problem: &ConceptualProblem,
    x: &[VarId],
    clustering: Option<&Clustering>,
) -> Result<Option<HullArtifacts>, PipelineError> {
    let targets = hull_targets(problem, x);
    let points = scoped(problem);
    Ok(match (problem.trust_region.policy, clustering) {
        (RegionPolicy::None, _) => None,
        (RegionPolicy::SingleHull, _) => Some(attach_hull(mio, &points, &targets, "tr")?),
        (RegionPolicy::Union { .. }, Some(c)) => Some(attach_union_of_hulls(mio, &points, &targets, c, "tr")?),
        (RegionPolicy::Union { k, seed }, None) => {
            let c = kmeans(&points, k, seed)?;
            Some(attach_union_of_hulls(mio, &points, &targets, &c, "tr")?)
        }
    })
}

/// Builds the full model: known rows, learned outcomes, trust region.
pub fn assemble(problem: &ConceptualProblem) -> Result<Assembled, PipelineError> {
    problem.validate()?;
    let clustering = match problem.trust_region.policy {
        RegionPolicy::Union { k, seed } => Some(kmeans(&scoped(problem), k, seed)?),
        _ => None,
    };

    let mut mio = MioModel::new();
    let (x, extra) = add_base(&mut mio, problem);
    let policy = match problem.big_m {
        BigMMode::Interval => BigMPolicy::Interval,
        BigMMode::Region if problem.learned.is_empty() => BigMPolicy::Interval,
        BigMMode::Region => {
            let mut region = mio.clone();
            attach_region(&mut region, problem, &x, clustering.as_ref())?;
            match RegionOracle::new(&region, x.clone()) {
                Ok(o) => BigMPolicy::Lp(o),
                Err(EmbedError::InfeasibleRegion) => return Err(PipelineError::Infeasible),
                Err(e) => return Err(e.into()),
            }
        }
    };
    let var = |j: usize| if j < x.len() { x[j] } else { extra[j - x.len()] };
    mio.set_objective(
        problem.objective.iter().map(|&(j, c)| (var(j), c)),
        problem.objective_constant,
    );

    let ctx = EmbedContext::new(x.clone(), problem.w.clone(), problem.x_bounds.clone()).with_policy(policy);
    let mut outcomes = Vec::with_capacity(problem.learned.len());
    for (k, l) in problem.learned.iter().enumerate() {
        let prefix = format!("{}{k}", sanitize(&l.binding.outcome));
        let mut art = embed_model(&mut mio, &l.model, &ctx, &prefix)?;
        bind_outcome(&mut mio, &mut art, &l.binding)?;
        outcomes.push(art);
    }
    let hull = attach_region(&mut mio, problem, &x, clustering.as_ref())?;
    Ok(Assembled {
        model: mio,
        x,
        extra,
        outcomes,
        hull,
        clustering,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutcomeReport {
    pub outcome: String,
    /// Value of the outcome variable in the solution.
    pub embedded: f64,
    /// The model's own prediction at the solution.
    pub oracle: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Timing {
    pub assemble_seconds: f64,
    pub solve_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub optimal: bool,
    pub objective: f64,
    pub x: Vec<f64>,
    pub extra: Vec<f64>,
    pub outcomes: Vec<OutcomeReport>,
    /// Active cluster of a union trust region or of a clustered solve.
    pub cluster: Option<usize>,
    pub nodes: usize,
    pub timing: Timing,
}

/// Largest violation of the problem's known rows at `x` and `extra`.
pub fn known_row_violation(problem: &ConceptualProblem, x: &[f64], extra: &[f64]) -> f64 {
    let val = |j: usize| if j < x.len() { x[j] } else { extra[j - x.len()] };
    problem
        .known
        .iter()
        .map(|r| {
            let a: f64 = r.terms.iter().map(|&(j, c)| c * val(j)).sum();
            match r.sense {
                Sense::Le => (a - r.rhs).max(0.0),
                Sense::Ge => (r.rhs - a).max(0.0),
                Sense::Eq => (a - r.rhs).abs(),
            }
        })
        .fold(0.0, f64::max)
}

pub(crate) fn report(
    problem: &ConceptualProblem,
    asm: &Assembled,
    primal: &[f64],
    objective: f64,
    optimal: bool,
    nodes: usize,
    timing: Timing,
) -> Result<SolveReport, PipelineError> {
    let x: Vec<f64> = asm.x.iter().map(|v| primal[v.0]).collect();
    let extra: Vec<f64> = asm.extra.iter().map(|v| primal[v.0]).collect();
    let mut outcomes = Vec::with_capacity(asm.outcomes.len());
    for (l, art) in problem.learned.iter().zip(&asm.outcomes) {
        let embedded = primal[art.outcome.0];
        let oracle = l.model.predict(&x, &problem.w)?;
        outcomes.push(OutcomeReport {
            outcome: l.binding.outcome.clone(),
            embedded,
            oracle,
            gap: (embedded - oracle).abs(),
        });
    }
    let cluster = asm
        .hull
        .as_ref()
        .and_then(|h| h.clusters.iter().position(|u| primal[u.0] > 0.5));
    Ok(SolveReport {
        optimal,
        objective,
        x,
        extra,
        outcomes,
        cluster,
        nodes,
        timing,
    })
}

/// Assembles and solves `problem`.
pub fn solve(problem: &ConceptualProblem, options: &MipOptions) -> Result<SolveReport, PipelineError> {
    let t0 = Instant::now();
    let asm = assemble(problem)?;
    let assemble_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let sol = match solve_mip(&asm.model, options) {
        Ok(s) => s,
        Err(MipError::TimeLimit {
            incumbent: Some(s), ..
        }) => *s,
        Err(MipError::TimeLimit { incumbent: None, .. }) => return Err(PipelineError::NoSolution),
        Err(e) => return Err(e.into()),
    };
    let timing = Timing {
        assemble_seconds,
        solve_seconds: t1.elapsed().as_secs_f64(),
    };
    report(
        problem,
        &asm,
        &sol.primal,
        sol.objective,
        sol.status == MipStatus::Optimal,
        sol.nodes,
        timing,
    )
}

pub(crate) fn write_csv<T: Serialize>(rows: impl IntoIterator<Item = T>, path: &std::path::Path) -> Result<(), PipelineError> {
    let err = |e: csv::Error| PipelineError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| err(e.into()))
}
