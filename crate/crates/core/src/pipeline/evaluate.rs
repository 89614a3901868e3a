//! Experiments on assembled problems: prescription quality with and without
//! a trust region, and leaf counts of tree constraints by depth.

use std::path::Path;
use std::time::Instant;

use conlearn_mio::MipOptions;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{known_row_violation, solve, solve_tree_by_leaves, write_csv, ConceptualProblem, PipelineError};
use crate::data::Dataset;
use crate::model_ir::{ModelShape, PredictiveModel, Task};
use crate::trainers::{train_cart, CartParams};
use crate::trust_region::TrustRegionSpec;

/// Scales each objective coefficient by an independent draw from
/// `U[0.5, 1.5]`.
pub fn sample_costs(baseline: &[(usize, f64)], rng: &mut impl Rng) -> Vec<(usize, f64)> {
    baseline.iter().map(|&(j, c)| (j, c * rng.gen_range(0.5..1.5))).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationRow {
    pub repetition: usize,
    pub trust_region: bool,
    pub objective: Option<f64>,
    /// Embedded value of the first learned outcome.
    pub predicted: Option<f64>,
    /// Ground truth at the prescription.
    pub truth: Option<f64>,
    pub squared_error: Option<f64>,
    /// Largest violation of the known rows at the prescription.
    pub known_violation: Option<f64>,
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub rows: Vec<EvaluationRow>,
    pub mse: f64,
    pub mse_trust_region: f64,
    pub infeasible: usize,
    pub infeasible_trust_region: usize,
}

fn mean_sq(rows: &[EvaluationRow], tr: bool) -> f64 {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| r.trust_region == tr)
        .filter_map(|r| r.squared_error)
        .collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// For each of `repetitions` sampled cost vectors, solves `template` without
/// a trust region and with `region`, and compares the first learned
/// outcome's embedded value against `truth` at the prescription.
pub fn evaluate_prescriptions<F>(
    template: &ConceptualProblem,
    region: &TrustRegionSpec,
    repetitions: usize,
    seed: u64,
    truth: F,
    options: &MipOptions,
) -> Result<Evaluation, PipelineError>
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    if template.learned.is_empty() {
        return Err(PipelineError::InvalidProblem("evaluation needs a learned outcome".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let costs: Vec<Vec<(usize, f64)>> = (0..repetitions)
        .map(|_| sample_costs(&template.objective, &mut rng))
        .collect();
    let jobs: Vec<(usize, bool)> = (0..repetitions).flat_map(|r| [(r, false), (r, true)]).collect();
    let rows: Result<Vec<EvaluationRow>, PipelineError> = jobs
        .par_iter()
        .map(|&(rep, tr)| {
            let mut p = template.clone();
            p.objective = costs[rep].clone();
            p.trust_region = if tr { region.clone() } else { TrustRegionSpec::none() };
            let t = Instant::now();
            let row = match solve(&p, options) {
                Ok(r) => {
                    let predicted = r.outcomes[0].embedded;
                    let actual = truth(&r.x, &p.w);
                    EvaluationRow {
                        repetition: rep,
                        trust_region: tr,
                        objective: Some(r.objective),
                        predicted: Some(predicted),
                        truth: Some(actual),
                        squared_error: Some((predicted - actual).powi(2)),
                        known_violation: Some(known_row_violation(&p, &r.x, &r.extra)),
                        seconds: 0.0,
                    }
                }
                Err(PipelineError::Infeasible) => EvaluationRow {
                    repetition: rep,
                    trust_region: tr,
                    objective: None,
                    predicted: None,
                    truth: None,
                    squared_error: None,
                    known_violation: None,
                    seconds: 0.0,
                },
                Err(e) => return Err(e),
            };
            Ok(EvaluationRow {
                seconds: t.elapsed().as_secs_f64(),
                ..row
            })
        })
        .collect();
    let rows = rows?;
    let count = |tr: bool| rows.iter().filter(|r| r.trust_region == tr && r.objective.is_none()).count();
    Ok(Evaluation {
        mse: mean_sq(&rows, false),
        mse_trust_region: mean_sq(&rows, true),
        infeasible: count(false),
        infeasible_trust_region: count(true),
        rows,
    })
}

#[derive(Serialize)]
struct EvalTiming {
    repetition: usize,
    trust_region: bool,
    seconds: f64,
}

/// Writes per-solve results to `path` and their wall times to the sibling
/// timing file.
pub fn write_evaluation_csv(rows: &[EvaluationRow], path: &Path) -> Result<(), PipelineError> {
    write_csv(rows, path)?;
    write_csv(
        rows.iter().map(|r| EvalTiming {
            repetition: r.repetition,
            trust_region: r.trust_region,
            seconds: r.seconds,
        }),
        &crate::timing_path(path),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeafDepthRow {
    pub max_depth: usize,
    pub leaves: usize,
    /// Reachable leaves whose prediction satisfies the bound: the number of
    /// LPs the decomposition solves.
    pub admissible_leaves: usize,
    pub lp_objective: Option<f64>,
    pub mip_objective: Option<f64>,
    #[serde(skip)]
    pub lp_seconds: f64,
    #[serde(skip)]
    pub mip_seconds: f64,
}

/// Trains a regression tree on `outcome` for each depth, puts it in place of
/// the template's single learned model, and solves the problem both by leaf
/// decomposition and as one MIP.
pub fn leaf_count_experiment(
    template: &ConceptualProblem,
    data: &Dataset,
    outcome: &str,
    depths: &[usize],
    min_leaf: usize,
    threads: usize,
    options: &MipOptions,
) -> Result<Vec<LeafDepthRow>, PipelineError> {
    if template.learned.len() != 1 {
        return Err(PipelineError::NotDecomposable("needs exactly one learned outcome".into()));
    }
    let features = template.learned[0].model.features.clone();
    let mut rows = Vec::with_capacity(depths.len());
    for &depth in depths {
        let tree = train_cart(
            data,
            outcome,
            &CartParams {
                max_depth: depth,
                min_leaf,
                task: Task::Regression,
                ..CartParams::default()
            },
        )?;
        let leaves = tree.leaves().len();
        let mut p = template.clone();
        p.learned[0].model = PredictiveModel::new(outcome, features.clone(), ModelShape::Tree(tree));
        let t = Instant::now();
        let (lp_objective, admissible) = match solve_tree_by_leaves(&p, threads) {
            Ok(r) => (Some(r.best.objective), r.leaves.len()),
            Err(PipelineError::Infeasible) => (None, 0),
            Err(e) => return Err(e),
        };
        let lp_seconds = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let mip_objective = match solve(&p, options) {
            Ok(r) => Some(r.objective),
            Err(PipelineError::Infeasible) => None,
            Err(e) => return Err(e),
        };
        rows.push(LeafDepthRow {
            max_depth: depth,
            leaves,
            admissible_leaves: admissible,
            lp_objective,
            mip_objective,
            lp_seconds,
            mip_seconds: t.elapsed().as_secs_f64(),
        });
    }
    Ok(rows)
}

#[derive(Serialize)]
struct DepthTiming {
    max_depth: usize,
    lp_seconds: f64,
    mip_seconds: f64,
}

pub fn write_leaf_depth_csv(rows: &[LeafDepthRow], path: &Path) -> Result<(), PipelineError> {
    write_csv(rows, path)?;
    write_csv(
        rows.iter().map(|r| DepthTiming {
            max_depth: r.max_depth,
            lp_seconds: r.lp_seconds,
            mip_seconds: r.mip_seconds,
        }),
        &crate::timing_path(path),
    )
}
