//! Linear regression and linear classifier embeddings.

use conlearn_mio::{MioModel, Sense};

use super::bigm::interval_max;
use super::binding::{bind_outcome, OutcomeBinding, Role};
use super::{EmbedContext, EmbedError, EmbeddingArtifacts, OutputScale};
use crate::model_ir::{LinearModel, Task};

/// Adds `y` and the row `y − βxᵀx = β0 + βwᵀw`. For classifiers `y` is the
/// signed margin.
pub fn embed_linear(
    mio: &mut MioModel,
    model: &LinearModel,
    ctx: &EmbedContext,
    prefix: &str,
) -> Result<EmbeddingArtifacts, EmbedError> {
    let terms: Vec<(usize, f64)> = model.beta_x.iter().copied().enumerate().filter(|&(_, b)| b != 0.0).collect();
    let constant = model.intercept + crate::model_ir::dot(&model.beta_w, &ctx.w);
    let hi = interval_max(&terms, &ctx.x_bounds) + constant;
    let neg: Vec<(usize, f64)> = terms.iter().map(|&(j, b)| (j, -b)).collect();
    let lo = constant - interval_max(&neg, &ctx.x_bounds);
    let y = mio.add_continuous(f64::NEG_INFINITY, f64::INFINITY, format!("{prefix}_y"));
    let scale = match model.task {
        Task::Regression => OutputScale::Value,
        Task::Classification => OutputScale::Margin,
    };
    let mut art = EmbeddingArtifacts::new(y, (lo, hi), scale);
    art.coef_scale = model.beta_x.iter().fold(1.0f64, |m, b| m.max(b.abs()));
    let mut row = vec![(y, 1.0)];
    row.extend(ctx.vars(&terms).into_iter().map(|(v, b)| (v, -b)));
    art.rows.push(mio.add_constraint(row, Sense::Eq, constant, format!("{prefix}_linear")));
    Ok(art)
}

/// Linear classifier restricted to the half-space where it predicts 1.
pub fn embed_svc_halfspace(
    mio: &mut MioModel,
    model: &LinearModel,
    ctx: &EmbedContext,
    prefix: &str,
) -> Result<EmbeddingArtifacts, EmbedError> {
    let mut art = embed_linear(mio, model, ctx, prefix)?;
    art.scale = OutputScale::Margin;
    bind_outcome(mio, &mut art, &OutcomeBinding::new(prefix, Role::ClassifierFeasible(0.5)))?;
    Ok(art)
}
