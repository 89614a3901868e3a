//! Forest and boosting embeddings. Member trees share the decision
//! variables but each owns its leaf indicators.

use conlearn_mio::{MioModel, Sense, VarId};

use super::binding::{bind_outcome, OutcomeBinding, Role};
use super::tree::embed_tree_into;
use super::{EmbedContext, EmbedError, EmbeddingArtifacts, OutputScale};
use crate::model_ir::{ForestModel, GbmModel, TreeModel};
use crate::trainers::BoundDirection;

fn embed_members(
    mio: &mut MioModel,
    trees: &[TreeModel],
    ctx: &EmbedContext,
    prefix: &str,
    art: &mut EmbeddingArtifacts,
) -> Result<Vec<VarId>, EmbedError> {
    let mut ys = Vec::with_capacity(trees.len());
    for (t, tree) in trees.iter().enumerate() {
        let ta = embed_tree_into(mio, tree, ctx, &format!("{prefix}_t{t}"), art, None)?;
        ys.push(ta.outcome);
        art.trees.push(ta);
    }
    Ok(ys)
}

/// `y = (1/P) Σ y_t`.
pub fn embed_forest_mean(
    mio: &mut MioModel,
    forest: &ForestModel,
    ctx: &EmbedContext,
    prefix: &str,
) -> Result<EmbeddingArtifacts, EmbedError> {
    let y = mio.add_continuous(f64::NEG_INFINITY, f64::INFINITY, format!("{prefix}_y"));
    let mut art = EmbeddingArtifacts::new(y, (0.0, 0.0), OutputScale::Value);
    let ys = embed_members(mio, &forest.trees, ctx, prefix, &mut art)?;
    let p = ys.len() as f64;
    let mut row = vec![(y, 1.0)];
    row.extend(ys.iter().map(|&v| (v, -1.0 / p)));
    art.rows.push(mio.add_constraint(row, Sense::Eq, 0.0, format!("{prefix}_mean")));
    let lo = art.trees.iter().map(|t| t.bounds.0).sum::<f64>() / p;
    let hi = art.trees.iter().map(|t| t.bounds.1).sum::<f64>() / p;
    art.outcome_bounds = (lo, hi);
    art.forest_mean = true;
    Ok(art)
}

/// Forest whose members must satisfy `y_t ≤ τ` (or `≥ τ`) for at least a
/// `1 − α` fraction of trees.
pub fn embed_forest_violation(
    mio: &mut MioModel,
    forest: &ForestModel,
    ctx: &EmbedContext,
    prefix: &str,
    tau: f64,
    alpha: f64,
    direction: BoundDirection,
) -> Result<EmbeddingArtifacts, EmbedError> {
    let mut art = embed_forest_mean(mio, forest, ctx, prefix)?;
    let role = match direction {
        BoundDirection::Le => Role::Upper(tau),
        BoundDirection::Ge => Role::Lower(tau),
    };
    bind_outcome(mio, &mut art, &OutcomeBinding::new(prefix, role).with_violation(alpha))?;
    Ok(art)
}

/// `y = bias + Σ β_t y_t`.
pub fn embed_gbm(
    mio: &mut MioModel,
    gbm: &GbmModel,
    ctx: &EmbedContext,
    prefix: &str,
) -> Result<EmbeddingArtifacts, EmbedError> {
    let y = mio.add_continuous(f64::NEG_INFINITY, f64::INFINITY, format!("{prefix}_y"));
    let mut art = EmbeddingArtifacts::new(y, (0.0, 0.0), OutputScale::Value);
    let ys = embed_members(mio, &gbm.trees, ctx, prefix, &mut art)?;
    let mut row = vec![(y, 1.0)];
    row.extend(ys.iter().zip(&gbm.weights).map(|(&v, &b)| (v, -b)));
    art.rows.push(mio.add_constraint(row, Sense::Eq, gbm.bias, format!("{prefix}_sum")));
    let (mut lo, mut hi) = (gbm.bias, gbm.bias);
    for (t, &b) in art.trees.iter().zip(&gbm.weights) {
        lo += (b * t.bounds.0).min(b * t.bounds.1);
        hi += (b * t.bounds.0).max(b * t.bounds.1);
    }
    art.outcome_bounds = (lo, hi);
    Ok(art)
}
