//! Decision-tree embedding with one indicator per reachable leaf.
//!
//! For leaf `i` and each split on its path the row
//! `ā·x + M·l_i ≤ b̄ + M` holds, where `ā·x ≤ b̄` is the split side taken
//! (strict sides negated and shifted by ε). Then `Σ l_i = 1` and
//! `y = Σ p_i l_i`.

use std::collections::HashMap;

use conlearn_mio::{MioModel, Sense};

use super::bigm::{interval_max, max_form, pad};
use super::{BigMPolicy, EmbedContext, EmbedError, EmbeddingArtifacts, OutputScale, TreeArtifacts};
use crate::model_ir::{Side, TreeModel};

/// Margin that makes the `>` side of a split a closed row.
pub fn strict_epsilon(rhs: f64) -> f64 {
    1e-6 * (1.0 + rhs.abs())
}

fn left_guard(coefficients: &[(usize, f64)], rhs: f64) -> f64 {
    let amax = coefficients.iter().fold(1.0f64, |m, &(_, a)| m.max(a.abs()));
    1e-8 * (1.0 + rhs.abs()) * amax
}

/// One side of a split as `terms·x ≤ rhs`, with the context already
/// moved to the right-hand side.
#[derive(Clone, Debug, PartialEq)]
pub struct PathRow {
    pub split: usize,
    pub side: Side,
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Rows describing the region of `x` that reaches `leaf` at context `w`.
pub fn leaf_polyhedron(tree: &TreeModel, leaf: usize, ctx: &EmbedContext) -> Vec<PathRow> {
    tree.leaves()[leaf]
        .path
        .iter()
        .map(|&(s, side)| {
            let split = &tree.splits()[s];
            let (terms, constant) = ctx.split_joint(&split.coefficients);
            let b = split.rhs;
            match side {
                Side::Left => PathRow {
                    split: s,
                    side,
                    terms,
                    rhs: b - left_guard(&split.coefficients, b) - constant,
                },
                Side::Right => PathRow {
                    split: s,
                    side,
                    terms: terms.iter().map(|&(j, a)| (j, -a)).collect(),
                    rhs: -b - strict_epsilon(b) + constant,
                },
            }
        })
        .collect()
}

/// Leaves whose path rows can all hold somewhere in the `x` box.
pub fn reachable_leaves(tree: &TreeModel, ctx: &EmbedContext) -> Vec<usize> {
    (0..tree.leaves().len())
        .filter(|&i| {
            leaf_polyhedron(tree, i, ctx).iter().all(|r| {
                let neg: Vec<(usize, f64)> = r.terms.iter().map(|&(j, a)| (j, -a)).collect();
                let min = -interval_max(&neg, &ctx.x_bounds);
                min <= r.rhs
            })
        })
        .collect()
}

pub fn embed_tree(
    mio: &mut MioModel,
    tree: &TreeModel,
    ctx: &EmbedContext,
    prefix: &str,
) -> Result<EmbeddingArtifacts, EmbedError> {
    let y = mio.add_continuous(0.0, 0.0, format!("{prefix}_y"));
    let mut art = EmbeddingArtifacts::new(y, (0.0, 0.0), OutputScale::Value);
    let t = embed_tree_into(mio, tree, ctx, prefix, &mut art, Some(y))?;
    art.outcome_bounds = t.bounds;
    art.trees.push(t);
    Ok(art)
}

/// Embeds `tree`, recording rows and variables in `art`. The tree's outcome
/// variable is `outcome` when given, otherwise a new one.
pub(crate) fn embed_tree_into(
    mio: &mut MioModel,
    tree: &TreeModel,
    ctx: &EmbedContext,
    prefix: &str,
    art: &mut EmbeddingArtifacts,
    outcome: Option<conlearn_mio::VarId>,
) -> Result<TreeArtifacts, EmbedError> {
    let leaves = reachable_leaves(tree, ctx);
    if leaves.is_empty() {
        return Err(EmbedError::NoReachableLeaf);
    }
    let preds: Vec<f64> = leaves.iter().map(|&i| tree.leaves()[i].prediction).collect();
    let lo = preds.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = preds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let y = match outcome {
        Some(v) => {
            mio.set_bounds(v, lo, hi);
            v
        }
        None => {
            let v = mio.add_continuous(lo, hi, format!("{prefix}_y"));
            art.aux.push(v);
            v
        }
    };
    let lp_policy = matches!(ctx.big_m, BigMPolicy::Lp(_));

    if let [only] = leaves[..] {
        for r in leaf_polyhedron(tree, only, ctx) {
            if max_form(ctx, &r.terms)? <= r.rhs {
                continue;
            }
            let row = mio.add_constraint(ctx.vars(&r.terms), Sense::Le, r.rhs, format!("{prefix}_leaf{only}_s{}", r.split));
            art.rows.push(row);
        }
        return Ok(TreeArtifacts {
            outcome: y,
            bounds: (lo, hi),
            leaves: vec![(only, None)],
        });
    }

    let mut m_cache: HashMap<(usize, Side), f64> = HashMap::new();
    let mut leaf_vars = Vec::with_capacity(leaves.len());
    for &i in &leaves {
        let l = mio.add_binary(format!("{prefix}_l{i}"));
        art.binaries.push(l);
        leaf_vars.push((i, Some(l)));
        for r in leaf_polyhedron(tree, i, ctx) {
            let m = match m_cache.get(&(r.split, r.side)) {
                Some(&m) => m,
                None => {
                    let raw = max_form(ctx, &r.terms)? - r.rhs;
                    let m = if raw <= 0.0 {
                        0.0
                    } else if lp_policy {
                        pad(raw)
                    } else {
                        raw
                    };
                    m_cache.insert((r.split, r.side), m);
                    m
                }
            };
            if m == 0.0 {
                // The side holds everywhere on the region.
                continue;
            }
            let mut terms = ctx.vars(&r.terms);
            terms.push((l, m));
            let row = mio.add_constraint(terms, Sense::Le, r.rhs + m, format!("{prefix}_l{i}_s{}", r.split));
            art.rows.push(row);
            art.big_m.push((row, m));
        }
    }
    let ls: Vec<_> = leaf_vars.iter().map(|&(_, l)| (l.expect("binary"), 1.0)).collect();
    art.rows.push(mio.add_constraint(ls, Sense::Eq, 1.0, format!("{prefix}_one_leaf")));
    let mut link = vec![(y, 1.0)];
    link.extend(leaf_vars.iter().zip(&preds).map(|(&(_, l), &p)| (l.expect("binary"), -p)));
    art.rows.push(mio.add_constraint(link, Sense::Eq, 0.0, format!("{prefix}_value")));
    Ok(TreeArtifacts {
        outcome: y,
        bounds: (lo, hi),
        leaves: leaf_vars,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_ir::{NodeRef, Split, Task};
    use conlearn_mio::{solve_mip, MipOptions};

    fn stump() -> TreeModel {
        TreeModel::new(
            vec![Split {
                coefficients: vec![(0, 1.0)],
                rhs: 0.5,
                left: NodeRef::Leaf(0),
                right: NodeRef::Leaf(1),
            }],
            vec![0.2, 0.8],
            NodeRef::Split(0),
            Task::Regression,
        )
        .unwrap()
    }

    #[test]
    fn minimizing_a_stump_picks_the_left_leaf() {
        let mut mio = MioModel::new();
        let x = mio.add_continuous(0.0, 1.0, "x");
        let ctx = EmbedContext::new(vec![x], vec![], vec![(0.0, 1.0)]);
        let art = embed_tree(&mut mio, &stump(), &ctx, "t").unwrap();
        mio.set_objective([(art.outcome, 1.0)], 0.0);
        let s = solve_mip(&mio, &MipOptions::default()).unwrap();
        assert!((s.objective - 0.2).abs() < 1e-9);
        assert!(s.primal[x.0] <= 0.5);
    }

    #[test]
    fn context_split_prunes_leaves() {
        // Split on w: w = 0.9 sends everything right.
        let t = TreeModel::new(
            vec![Split {
                coefficients: vec![(1, 1.0)],
                rhs: 0.5,
                left: NodeRef::Leaf(0),
                right: NodeRef::Leaf(1),
            }],
            vec![0.2, 0.8],
            NodeRef::Split(0),
            Task::Regression,
        )
        .unwrap();
        let mut mio = MioModel::new();
        let x = mio.add_continuous(0.0, 1.0, "x");
        let ctx = EmbedContext::new(vec![x], vec![0.9], vec![(0.0, 1.0)]);
        let art = embed_tree(&mut mio, &t, &ctx, "t").unwrap();
        assert!(art.binaries.is_empty());
        assert_eq!(art.outcome_bounds, (0.8, 0.8));
    }
}
