//! Compiles trained models into variables and rows of a [`MioModel`].
//!
//! Every embedding binds an outcome variable `y` to the model's prediction at
//! the decision variables `x` and a fixed context `w`. The outcome is then
//! constrained or priced by [`bind_outcome`].
//!
//! Split rows use a small guard on each side so that any solution the solver
//! accepts, within its feasibility tolerance, lands in the same leaf under the
//! reference predictor: the `≤` side is tightened by
//! `1e-8·(1+|b|)·max(1, ‖a‖∞)` and the strict side by `1e-6·(1+|b|)`.

mod bigm;
mod binding;
mod ensemble;
mod linear;
mod mlp;
mod tree;

use conlearn_mio::{LpError, MioModel, RowId, VarId};
use thiserror::Error;

use crate::model_ir::{ModelShape, PredictiveModel};

pub use bigm::{compute_big_m, interval_max, BigMPolicy, RegionOracle};
pub use binding::{bind_outcome, LearningMode, OutcomeBinding, Role};
pub use ensemble::{embed_forest_mean, embed_forest_violation, embed_gbm};
pub use linear::{embed_linear, embed_svc_halfspace};
pub use mlp::{
    compute_activation_bounds, embed_mlp, embed_mlp_classifier, embed_multiclass_argmax, ActivationBounds,
};
pub use tree::{embed_tree, leaf_polyhedron, reachable_leaves, strict_epsilon, PathRow};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("no leaf of the tree is reachable for the given context")]
    NoReachableLeaf,
    #[error("big-M region is unbounded in direction of a split")]
    UnboundedRegion,
    #[error("big-M region is infeasible")]
    InfeasibleRegion,
    #[error("activation bounds of layer {layer}, node {node} are not finite")]
    UnboundedActivation { layer: usize, node: usize },
    #[error("expected {expected} context values, got {got}")]
    ContextMismatch { expected: usize, got: usize },
    #[error("binding not applicable: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Shared inputs of every embedding: the decision variables, the fixed
/// context and how big-M constants are derived.
pub struct EmbedContext {
    pub x: Vec<VarId>,
    pub w: Vec<f64>,
    /// Box over `x` used for interval arithmetic.
    pub x_bounds: Vec<(f64, f64)>,
    pub big_m: BigMPolicy,
}

impl EmbedContext {
    pub fn new(x: Vec<VarId>, w: Vec<f64>, x_bounds: Vec<(f64, f64)>) -> Self {
        Self {
            x,
            w,
            x_bounds,
            big_m: BigMPolicy::Interval,
        }
    }

    pub fn with_policy(mut self, policy: BigMPolicy) -> Self {
        self.big_m = policy;
        self
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Splits a form over the joint input into `x` terms (by position) and
    /// a constant from the fixed context.
    pub(crate) fn split_joint(&self, coefs: &[(usize, f64)]) -> (Vec<(usize, f64)>, f64) {
        let n = self.n();
        let mut terms = Vec::new();
        let mut constant = 0.0;
        for &(j, a) in coefs {
            if j < n {
                terms.push((j, a));
            } else {
                constant += a * self.w[j - n];
            }
        }
        (terms, constant)
    }

    pub(crate) fn vars(&self, terms: &[(usize, f64)]) -> Vec<(VarId, f64)> {
        terms.iter().map(|&(j, a)| (self.x[j], a)).collect()
    }

    /// Joint box: `x` bounds followed by the point interval of each `w`.
    pub fn joint_box(&self) -> Vec<(f64, f64)> {
        self.x_bounds
            .iter()
            .copied()
            .chain(self.w.iter().map(|&v| (v, v)))
            .collect()
    }
}

/// How the outcome variable relates to the model's prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputScale {
    /// `y` equals the prediction.
    Value,
    /// `y` is a linear classifier's signed margin; label 1 iff `y ≥ 0`.
    Margin,
    /// `y` is the logit of a sigmoid network.
    Logit,
    /// `y` is the predicted class index of a multi-class network.
    ClassIndex,
}

/// Outcome and indicator variables of one tree.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeArtifacts {
    pub outcome: VarId,
    pub bounds: (f64, f64),
    /// Surviving leaves with their indicator; `None` when the leaf is the
    /// only survivor and needs no binary.
    pub leaves: Vec<(usize, Option<VarId>)>,
}

/// Everything an embedding added to the model.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingArtifacts {
    pub outcome: VarId,
    pub outcome_bounds: (f64, f64),
    pub scale: OutputScale,
    pub aux: Vec<VarId>,
    pub binaries: Vec<VarId>,
    pub rows: Vec<RowId>,
    /// Big-M constant used in each indicator row.
    pub big_m: Vec<(RowId, f64)>,
    pub trees: Vec<TreeArtifacts>,
    /// True when the outcome is the plain mean of `trees`, which enables
    /// violation limits.
    pub forest_mean: bool,
    /// Per-class indicator variables of a multi-class network.
    pub classes: Vec<VarId>,
    /// Largest coefficient magnitude in the row defining the outcome.
    pub coef_scale: f64,
    /// Post-activation variable of each hidden network node; `None` for
    /// nodes that are zero everywhere on the box.
    pub neurons: Vec<Vec<Option<VarId>>>,
}

impl EmbeddingArtifacts {
    pub(crate) fn new(outcome: VarId, outcome_bounds: (f64, f64), scale: OutputScale) -> Self {
        Self {
            outcome,
            outcome_bounds,
            scale,
            aux: Vec::new(),
            binaries: Vec::new(),
            rows: Vec::new(),
            big_m: Vec::new(),
            trees: Vec::new(),
            forest_mean: false,
            classes: Vec::new(),
            coef_scale: 1.0,
            neurons: Vec::new(),
        }
    }
}

/// Embeds any model shape. Variable and row names start with `prefix`.
pub fn embed_model(
    mio: &mut MioModel,
    model: &PredictiveModel,
    ctx: &EmbedContext,
    prefix: &str,
) -> Result<EmbeddingArtifacts, EmbedError> {
    if ctx.w.len() != model.features.p() {
        return Err(EmbedError::ContextMismatch {
            expected: model.features.p(),
            got: ctx.w.len(),
        });
    }
    match &model.shape {
        ModelShape::Linear(m) => embed_linear(mio, m, ctx, prefix),
        ModelShape::Tree(t) => embed_tree(mio, t, ctx, prefix),
        ModelShape::Forest(f) => embed_forest_mean(mio, f, ctx, prefix),
        ModelShape::Gbm(g) => embed_gbm(mio, g, ctx, prefix),
        ModelShape::Mlp(m) => embed_mlp(mio, m, ctx, prefix),
    }
}
