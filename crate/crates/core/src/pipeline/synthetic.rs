//! Seeded synthetic problems for tests and experiments.

use conlearn_mio::Sense;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use super::{ConceptualProblem, DecisionVar, KnownRow, LearnedOutcome, PipelineError};
use crate::data::Dataset;
use crate::embed::{OutcomeBinding, Role};
use crate::model_ir::{FeatureSpace, LinearModel, ModelShape, PredictiveModel, Task, TreeModel};
use crate::trainers::{train_cart, train_linear, CartParams};
use crate::trust_region::{HullScope, TrustRegionSpec};

/// Ground truth of the leaf-depth instance's outcome.
pub fn risk(x: &[f64]) -> f64 {
    (3.0 * x[0]).sin() + x[1] * x[1] + 0.5 * x[2]
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|j| format!("{prefix}{j}")).collect()
}

/// Three decision features on the unit cube with a noisy nonlinear `risk`
/// outcome. The template maximizes `Σx` subject to `Σx ≤ 2.2` and
/// `risk ≤ 1` through a placeholder tree to be replaced by a trained one.
pub fn leaf_depth_instance(samples: usize, seed: u64) -> Result<(ConceptualProblem, Dataset), PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.05).expect("valid sd");
    let x: Vec<Vec<f64>> = (0..samples).map(|_| (0..3).map(|_| rng.gen::<f64>()).collect()).collect();
    let y: Vec<f64> = x.iter().map(|r| risk(r) + rng.sample(noise)).collect();
    let data = Dataset::new(names("x", 3), Vec::new(), x, Vec::new(), vec![("risk".into(), y)])
        .map_err(|e| PipelineError::InvalidProblem(e.to_string()))?;
    let features = FeatureSpace {
        x_names: names("x", 3),
        w_names: Vec::new(),
        x_bounds: vec![(0.0, 1.0); 3],
        w_bounds: Vec::new(),
    };
    let mut p = ConceptualProblem::new(features.clone(), vec![(0.0, 1.0); 3], Vec::new());
    p.objective = vec![(0, -1.0), (1, -1.0), (2, -1.0)];
    p.known.push(KnownRow {
        terms: vec![(0, 1.0), (1, 1.0), (2, 1.0)],
        sense: Sense::Le,
        rhs: 2.2,
        name: "budget".into(),
    });
    p.learned.push(LearnedOutcome {
        model: PredictiveModel::new(
            "risk",
            features,
            ModelShape::Tree(TreeModel::constant(0.0, Task::Regression)),
        ),
        binding: OutcomeBinding::new("risk", Role::Upper(1.0)),
    });
    Ok((p, data))
}

/// Ground truth of the multi-constraint instance at doses `x` and context
/// `w`: `(efficacy, toxicity_a, toxicity_b)`.
pub fn regimen_truth(x: &[f64], w: &[f64]) -> (f64, f64, f64) {
    const EFF: [f64; 6] = [1.0, 0.8, 1.2, 0.6, 0.9, 1.1];
    const TOX_A: [f64; 6] = [0.6, 0.2, 0.9, 0.1, 0.4, 0.7];
    const TOX_B: [f64; 6] = [0.1, 0.7, 0.3, 0.5, 0.6, 0.2];
    let e = x.iter().zip(EFF).map(|(d, c)| c * d).sum::<f64>() - 0.3 * w[0];
    let a = x.iter().zip(TOX_A).map(|(d, c)| c * d * d).sum::<f64>() + 0.2 * w[1];
    let b = x.iter().zip(TOX_B).map(|(d, c)| c * d).sum::<f64>() + 0.1 * w[0] * w[1];
    (e, a, b)
}

/// A regimen-style problem with several learned parts: six doses in
/// `[0, 1]` with at most three drugs active (a known cardinality row over
/// indicator variables), two learned toxicity bounds and a learned efficacy
/// objective. The trust region is the joint hull of the training data.
pub fn multi_constraint_instance(samples: usize, seed: u64) -> Result<(ConceptualProblem, Dataset), PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.02).expect("valid sd");
    let mut xs = Vec::with_capacity(samples);
    let mut ws = Vec::with_capacity(samples);
    let mut ys: [Vec<f64>; 3] = Default::default();
    for _ in 0..samples {
        let mut x = vec![0.0; 6];
        for j in sample(&mut rng, 6, 3) {
            x[j] = rng.gen::<f64>();
        }
        let w = vec![rng.gen::<f64>(), rng.gen::<f64>()];
        let (e, a, b) = regimen_truth(&x, &w);
        ys[0].push(e + rng.sample(noise));
        ys[1].push(a + rng.sample(noise));
        ys[2].push(b + rng.sample(noise));
        xs.push(x);
        ws.push(w);
    }
    let [e, a, b] = ys;
    let data = Dataset::new(
        names("dose", 6),
        vec!["age".into(), "frailty".into()],
        xs,
        ws,
        vec![("efficacy".into(), e), ("toxicity_a".into(), a), ("toxicity_b".into(), b)],
    )
    .map_err(|e| PipelineError::InvalidProblem(e.to_string()))?;
    let features = data.feature_space();

    let efficacy: LinearModel = train_linear(&data, "efficacy", 1e-6)?;
    let tox_a = train_cart(
        &data,
        "toxicity_a",
        &CartParams {
            max_depth: 3,
            min_leaf: 10,
            ..CartParams::default()
        },
    )?;
    let tox_b = train_linear(&data, "toxicity_b", 1e-6)?;

    let w = vec![0.5, 0.5];
    let mut p = ConceptualProblem::new(features.clone(), vec![(0.0, 1.0); 6], w);
    for j in 0..6 {
        p.extra.push(DecisionVar::binary(format!("use{j}")));
        p.known.push(KnownRow {
            terms: vec![(j, 1.0), (6 + j, -1.0)],
            sense: Sense::Le,
            rhs: 0.0,
            name: format!("link{j}"),
        });
    }
    p.known.push(KnownRow {
        terms: (6..12).map(|j| (j, 1.0)).collect(),
        sense: Sense::Le,
        rhs: 3.0,
        name: "at_most_three".into(),
    });
    let learned = [
        ("efficacy", ModelShape::Linear(efficacy), Role::Objective(-1.0)),
        ("toxicity_a", ModelShape::Tree(tox_a), Role::Upper(0.6)),
        ("toxicity_b", ModelShape::Linear(tox_b), Role::Upper(0.8)),
    ];
    for (name, shape, role) in learned {
        p.learned.push(LearnedOutcome {
            model: PredictiveModel::new(name, features.clone(), shape),
            binding: OutcomeBinding::new(name, role),
        });
    }
    p.trust_region = TrustRegionSpec::single(data.joint_rows(), HullScope::Joint);
    Ok((p, data))
}
