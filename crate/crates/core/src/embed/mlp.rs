//! ReLU network embeddings.
//!
//! A hidden node with pre-activation `â` and bounds `L < 0 < U` becomes
//! `v ≥ â`, `v ≤ â − L(1 − z)`, `v ≤ U z`, `v ≥ 0` with `z` binary. Nodes
//! whose bounds do not straddle zero need no binary: they are either the
//! identity or constant zero.

use conlearn_mio::{MioModel, Sense, VarId};

use super::bigm::max_form;
use super::binding::{bind_outcome, OutcomeBinding, Role};
use super::{BigMPolicy, EmbedContext, EmbedError, EmbeddingArtifacts, OutputScale};
use crate::model_ir::{MlpModel, MlpOutput};

/// Pre-activation bounds of every hidden node and every output node.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationBounds {
    pub hidden: Vec<Vec<(f64, f64)>>,
    pub output: Vec<(f64, f64)>,
}

/// Layer-by-layer interval arithmetic over a box on the joint input.
pub fn compute_activation_bounds(model: &MlpModel, input_box: &[(f64, f64)]) -> Result<ActivationBounds, EmbedError> {
    propagate(model, input_box, None)
}

fn affine_bounds(row: &[f64], bias: f64, input: &[(f64, f64)]) -> (f64, f64) {
    let mut lo = bias;
    let mut hi = bias;
    for (&w, &(a, b)) in row.iter().zip(input) {
        lo += (w * a).min(w * b);
        hi += (w * a).max(w * b);
    }
    (lo, hi)
}

fn propagate(
    model: &MlpModel,
    input_box: &[(f64, f64)],
    first: Option<Vec<(f64, f64)>>,
) -> Result<ActivationBounds, EmbedError> {
    let depth = model.layers.len();
    let mut hidden = Vec::with_capacity(depth - 1);
    let mut current: Vec<(f64, f64)> = input_box.to_vec();
    let mut first = first;
    for (l, layer) in model.layers.iter().enumerate() {
        let mut pre: Vec<(f64, f64)> = layer
            .weights
            .iter()
            .zip(&layer.bias)
            .map(|(row, &b)| affine_bounds(row, b, &current))
            .collect();
        if l == 0 {
            if let Some(tight) = first.take() {
                for (p, t) in pre.iter_mut().zip(tight) {
                    *p = (p.0.max(t.0), p.1.min(t.1));
                }
            }
        }
        if let Some(node) = pre.iter().position(|&(a, b)| !(a.is_finite() && b.is_finite())) {
            return Err(EmbedError::UnboundedActivation { layer: l, node });
        }
        if l + 1 == depth {
            return Ok(ActivationBounds { hidden, output: pre });
        }
        current = pre.iter().map(|&(a, b)| (a.max(0.0), b.max(0.0))).collect();
        hidden.push(pre);
    }
    unreachable!("validated networks have an output layer")
}

#[derive(Clone, Copy)]
enum Input {
    Var(VarId),
    Const(f64),
}

fn affine_terms(row: &[f64], bias: f64, inputs: &[Input]) -> (Vec<(VarId, f64)>, f64) {
    let mut terms = Vec::new();
    let mut c = bias;
    for (&w, inp) in row.iter().zip(inputs) {
        if w == 0.0 {
            continue;
        }
        match *inp {
            Input::Var(v) => terms.push((v, w)),
            Input::Const(k) => c += w * k,
        }
    }
    (terms, c)
}

/// Embeds a network. The outcome is the output value (linear output), the
/// output logit (sigmoid output), or the predicted class index with one
/// indicator per class (multi-class output).
pub fn embed_mlp(
    mio: &mut MioModel,
    model: &MlpModel,
    ctx: &EmbedContext,
    prefix: &str,
) -> Result<EmbeddingArtifacts, EmbedError> {
    // First-layer bounds can be tightened by the region when it is known.
    let first = match &ctx.big_m {
        BigMPolicy::Interval => None,
        BigMPolicy::Lp(_) => {
            let n = ctx.n();
            let mut tight = Vec::with_capacity(model.layers[0].outputs());
            for (row, &b) in model.layers[0].weights.iter().zip(&model.layers[0].bias) {
                let joint: Vec<(usize, f64)> = row.iter().copied().enumerate().collect();
                let (terms, c) = ctx.split_joint(&joint);
                let neg: Vec<(usize, f64)> = terms.iter().map(|&(j, a)| (j, -a)).collect();
                let hi = max_form(ctx, &terms)? + c + b;
                let lo = -max_form(ctx, &neg)? + c + b;
                let pad = 1e-7 * (1.0 + lo.abs().max(hi.abs()));
                tight.push((lo - pad, hi + pad));
                debug_assert_eq!(row.len(), n + ctx.w.len());
            }
            Some(tight)
        }
    };
    let bounds = propagate(model, &ctx.joint_box(), first)?;

    let placeholder = mio.add_continuous(f64::NEG_INFINITY, f64::INFINITY, format!("{prefix}_y"));
    let mut art = EmbeddingArtifacts::new(placeholder, (0.0, 0.0), OutputScale::Value);
    let mut inputs: Vec<Input> = ctx
        .x
        .iter()
        .map(|&v| Input::Var(v))
        .chain(ctx.w.iter().map(|&c| Input::Const(c)))
        .collect();

    for (l, layer) in model.layers[..model.layers.len() - 1].iter().enumerate() {
        let mut next = Vec::with_capacity(layer.outputs());
        let mut vars = Vec::with_capacity(layer.outputs());
        for (i, (row, &b)) in layer.weights.iter().zip(&layer.bias).enumerate() {
            let (lo, hi) = bounds.hidden[l][i];
            let (terms, c) = affine_terms(row, b, &inputs);
            if hi <= 0.0 {
                next.push(Input::Const(0.0));
                vars.push(None);
                continue;
            }
            if terms.is_empty() {
                next.push(Input::Const(c.max(0.0)));
                vars.push(None);
                continue;
            }
            let v = mio.add_continuous(lo.max(0.0), hi, format!("{prefix}_v{l}_{i}"));
            art.aux.push(v);
            let mut eq: Vec<(VarId, f64)> = vec![(v, 1.0)];
            eq.extend(terms.iter().map(|&(x, w)| (x, -w)));
            if lo >= 0.0 {
                art.rows.push(mio.add_constraint(eq, Sense::Eq, c, format!("{prefix}_a{l}_{i}")));
            } else {
                let z = mio.add_binary(format!("{prefix}_z{l}_{i}"));
                art.binaries.push(z);
                // v ≥ â
                art.rows
                    .push(mio.add_constraint(eq.clone(), Sense::Ge, c, format!("{prefix}_lo{l}_{i}")));
                // v ≤ â − L(1 − z)
                let mut up = eq;
                up.push((z, -lo));
                let r = mio.add_constraint(up, Sense::Le, c - lo, format!("{prefix}_hi{l}_{i}"));
                art.rows.push(r);
                art.big_m.push((r, -lo));
                // v ≤ U z
                let r = mio.add_constraint([(v, 1.0), (z, -hi)], Sense::Le, 0.0, format!("{prefix}_on{l}_{i}"));
                art.rows.push(r);
                art.big_m.push((r, hi));
            }
            next.push(Input::Var(v));
            vars.push(Some(v));
        }
        art.neurons.push(vars);
        inputs = next;
    }

    let out = model.layers.last().expect("validated");
    let mut logits = Vec::with_capacity(out.outputs());
    for (k, (row, &b)) in out.weights.iter().zip(&out.bias).enumerate() {
        let (lo, hi) = bounds.output[k];
        let a = if k == 0 {
            mio.set_bounds(placeholder, lo, hi);
            placeholder
        } else {
            mio.add_continuous(lo, hi, format!("{prefix}_logit{k}"))
        };
        let (terms, c) = affine_terms(row, b, &inputs);
        let mut eq = vec![(a, 1.0)];
        eq.extend(terms.iter().map(|&(x, w)| (x, -w)));
        art.rows.push(mio.add_constraint(eq, Sense::Eq, c, format!("{prefix}_out{k}")));
        art.coef_scale = art.coef_scale.max(row.iter().fold(0.0, |m, w| m.max(w.abs())));
        logits.push((a, lo, hi));
    }

    match model.output {
        MlpOutput::Linear | MlpOutput::Sigmoid => {
            art.outcome_bounds = (logits[0].1, logits[0].2);
            art.scale = if model.output == MlpOutput::Linear {
                OutputScale::Value
            } else {
                OutputScale::Logit
            };
        }
        MlpOutput::SoftmaxArgmax => {
            art.aux.extend(logits[1..].iter().map(|l| l.0));
            argmax_block(mio, &mut art, &logits, prefix);
        }
    }
    Ok(art)
}

/// Class indicators `c_k` with `Σ c_k = 1` and, for each pair,
/// `c_i = 1 ⟹ a_i ≥ a_k + g`. The guard is larger against lower-indexed
/// classes because ties go to the lowest index.
fn argmax_block(mio: &mut MioModel, art: &mut EmbeddingArtifacts, logits: &[(VarId, f64, f64)], prefix: &str) {
    let k = logits.len();
    let scale = logits.iter().fold(1.0f64, |m, l| m.max(l.1.abs()).max(l.2.abs()));
    let classes: Vec<VarId> = (0..k).map(|c| mio.add_binary(format!("{prefix}_class{c}"))).collect();
    art.binaries.extend(&classes);
    art.rows.push(mio.add_constraint(
        classes.iter().map(|&c| (c, 1.0)),
        Sense::Eq,
        1.0,
        format!("{prefix}_one_class"),
    ));
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let g = if j < i { 1e-6 * scale } else { 1e-7 * scale };
            // a_i − a_j − M c_i ≥ g − M
            let min_diff = logits[i].1 - logits[j].2;
            let m = (g - min_diff).max(0.0);
            if m == 0.0 {
                continue;
            }
            let r = mio.add_constraint(
                [(logits[i].0, 1.0), (logits[j].0, -1.0), (classes[i], -m)],
                Sense::Ge,
                g - m,
                format!("{prefix}_dom{i}_{j}"),
            );
            art.rows.push(r);
            art.big_m.push((r, m));
        }
    }
    let idx = mio.add_continuous(0.0, (k - 1) as f64, format!("{prefix}_class"));
    let mut row = vec![(idx, 1.0)];
    row.extend(classes.iter().enumerate().map(|(c, &v)| (v, -(c as f64))));
    art.rows.push(mio.add_constraint(row, Sense::Eq, 0.0, format!("{prefix}_class_index")));
    art.aux.push(art.outcome);
    art.outcome = idx;
    art.outcome_bounds = (0.0, (k - 1) as f64);
    art.scale = OutputScale::ClassIndex;
    art.classes = classes;
}

/// Sigmoid network restricted to predicted probability at least `τ`.
pub fn embed_mlp_classifier(
    mio: &mut MioModel,
    model: &MlpModel,
    ctx: &EmbedContext,
    prefix: &str,
    tau: f64,
) -> Result<EmbeddingArtifacts, EmbedError> {
    if model.output != MlpOutput::Sigmoid {
        return Err(EmbedError::Unsupported("classifier embedding needs a sigmoid output".into()));
    }
    let mut art = embed_mlp(mio, model, ctx, prefix)?;
    bind_outcome(mio, &mut art, &OutcomeBinding::new(prefix, Role::ClassifierFeasible(tau)))?;
    Ok(art)
}

/// Multi-class network restricted to predicting class `target`.
pub fn embed_multiclass_argmax(
    mio: &mut MioModel,
    model: &MlpModel,
    ctx: &EmbedContext,
    prefix: &str,
    target: usize,
) -> Result<EmbeddingArtifacts, EmbedError> {
    if model.output != MlpOutput::SoftmaxArgmax {
        return Err(EmbedError::Unsupported("argmax embedding needs a multi-class output".into()));
    }
    let mut art = embed_mlp(mio, model, ctx, prefix)?;
    bind_outcome(mio, &mut art, &OutcomeBinding::new(prefix, Role::ClassTarget(target)))?;
    Ok(art)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_ir::Layer;
    use conlearn_mio::{solve_mip, MipOptions};

    fn relu_identity() -> MlpModel {
        MlpModel {
            layers: vec![
                Layer {
                    weights: vec![vec![1.0]],
                    bias: vec![0.0],
                },
                Layer {
                    weights: vec![vec![1.0]],
                    bias: vec![0.0],
                },
            ],
            output: MlpOutput::Linear,
        }
    }

    fn solve_at(x0: f64) -> (f64, f64, f64) {
        let mut mio = MioModel::new();
        let x = mio.add_continuous(x0, x0, "x");
        let ctx = EmbedContext::new(vec![x], vec![], vec![(-10.0, 10.0)]);
        let art = embed_mlp(&mut mio, &relu_identity(), &ctx, "n").unwrap();
        mio.set_objective([(art.outcome, 1.0)], 0.0);
        let s = solve_mip(&mio, &MipOptions::default()).unwrap();
        let v = art.neurons[0][0].unwrap();
        (s.primal[v.0], s.primal[art.binaries[0].0], s.primal[art.outcome.0])
    }

    #[test]
    fn active_relu() {
        let (v, z, y) = solve_at(2.0);
        assert!((v - 2.0).abs() < 1e-9 && z == 1.0 && (y - 2.0).abs() < 1e-9);
    }

    #[test]
    fn inactive_relu() {
        let (v, z, _) = solve_at(-1.0);
        assert!(v.abs() < 1e-9 && z == 0.0);
    }

    #[test]
    fn interval_bounds_of_identity_and_negation() {
        let b = compute_activation_bounds(&relu_identity(), &[(0.0, 1.0)]).unwrap();
        assert_eq!(b.hidden[0][0], (0.0, 1.0));
        let mut neg = relu_identity();
        neg.layers[0].weights[0][0] = -1.0;
        let b = compute_activation_bounds(&neg, &[(0.0, 1.0)]).unwrap();
        assert_eq!(b.hidden[0][0], (-1.0, 0.0));
    }

    #[test]
    fn two_class_target_forces_sign() {
        let model = MlpModel {
            layers: vec![
                Layer {
                    weights: vec![vec![1.0], vec![-1.0]],
                    bias: vec![0.0, 0.0],
                },
                Layer {
                    weights: vec![vec![1.0, -1.0], vec![-1.0, 1.0]],
                    bias: vec![0.0, 0.0],
                },
            ],
            output: MlpOutput::SoftmaxArgmax,
        };
        let mut mio = MioModel::new();
        let x = mio.add_continuous(-1.0, 1.0, "x");
        let ctx = EmbedContext::new(vec![x], vec![], vec![(-1.0, 1.0)]);
        embed_multiclass_argmax(&mut mio, &model, &ctx, "c", 1).unwrap();
        mio.set_objective([(x, 1.0)], 0.0);
        let s = solve_mip(&mio, &MipOptions::default()).unwrap();
        // logits are (x, −x) up to the ReLU split; class 1 needs x < 0
        assert!((s.primal[x.0] + 1.0).abs() < 1e-9);
        mio.set_objective([(x, -1.0)], 0.0);
        let s = solve_mip(&mio, &MipOptions::default()).unwrap();
        assert!(s.primal[x.0] < 0.0);
        assert_eq!(model.predict(&[s.primal[x.0]]), 1.0);
    }
}
