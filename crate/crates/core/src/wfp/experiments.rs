//! The three case-study experiments: prescription error with and without a
//! trust region, clustered solves, and the forest violation-limit sweep.

use std::path::Path;

use conlearn_mio::MipOptions;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{
    basket_groups, build_wfp_model, data_box, generate_dataset, ground_truth_palatability, NutritionTables,
    SupplyNetwork, WfpError, PALATABILITY,
};
use crate::data::Dataset;
use crate::model_ir::{ModelShape, PredictiveModel};
use crate::pipeline::{
    evaluate_prescriptions, sample_costs, solve, solve_clustered, write_csv, ConceptualProblem, EvaluationRow,
    PipelineError,
};
use crate::trainers::{fit_candidate, select_model, train_forest, Candidate, ForestParams, ModelClass};
use crate::trust_region::{HullScope, TrustRegionSpec};

/// Shared inputs of the experiments.
#[derive(Clone, Debug)]
pub struct ExperimentSetup {
    pub tables: NutritionTables,
    pub network: SupplyNetwork,
    pub data: Dataset,
    /// Palatability lower bound.
    pub threshold: f64,
    pub folds: usize,
    pub options: MipOptions,
}

impl ExperimentSetup {
    /// Shipped tables, the default network and a balanced dataset.
    pub fn new(samples: usize, data_seed: u64, network_seed: u64) -> Result<Self, WfpError> {
        let tables = NutritionTables::shipped();
        let data = generate_dataset(&tables, samples, data_seed)?;
        Ok(Self {
            network: SupplyNetwork::default_instance(tables.foods.len(), network_seed),
            tables,
            data,
            threshold: 0.5,
            folds: 5,
            options: MipOptions::default(),
        })
    }

    /// Ration model around `model` without a trust region; `x` is boxed by
    /// the training data.
    pub fn template(&self, model: PredictiveModel) -> Result<ConceptualProblem, WfpError> {
        build_wfp_model(
            &self.network,
            &self.tables,
            model,
            self.threshold,
            TrustRegionSpec::none(),
            &data_box(&self.data),
        )
    }

    /// Single hull of the training baskets.
    pub fn hull(&self) -> TrustRegionSpec {
        TrustRegionSpec::single(self.data.x.clone(), HullScope::XOnly)
    }

    pub fn truth(&self) -> impl Fn(&[f64], &[f64]) -> f64 + Sync {
        let groups = basket_groups(&self.tables.foods);
        move |x: &[f64], _: &[f64]| ground_truth_palatability(x, &groups)
    }

    fn fit(&self, candidate: &Candidate) -> Result<PredictiveModel, WfpError> {
        let shape = fit_candidate(candidate, &self.data, PALATABILITY, crate::model_ir::Task::Regression)?;
        Ok(PredictiveModel::new(PALATABILITY, self.data.feature_space(), shape))
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrustRegionRow {
    pub class: ModelClass,
    pub validation_mse: f64,
    pub mse: f64,
    pub mse_trust_region: f64,
    pub infeasible: usize,
    pub infeasible_trust_region: usize,
    /// Largest known-row violation over all prescriptions of the class.
    pub max_violation: f64,
    #[serde(skip)]
    pub seconds_mean: f64,
    #[serde(skip)]
    pub seconds_sd: f64,
    #[serde(skip)]
    pub seconds_trust_region_mean: f64,
    #[serde(skip)]
    pub seconds_trust_region_sd: f64,
    #[serde(skip)]
    pub solves: Vec<EvaluationRow>,
}

/// For each class: cross-validated MSE, then `repetitions` sampled cost
/// vectors solved without and with the data hull as trust region, scoring
/// the embedded palatability against the simulator at each prescription.
pub fn run_trust_region_experiment(
    setup: &ExperimentSetup,
    classes: &[ModelClass],
    repetitions: usize,
    seed: u64,
) -> Result<Vec<TrustRegionRow>, WfpError> {
    let mut rows = Vec::with_capacity(classes.len());
    for &class in classes {
        let candidate = Candidate::default_for(class);
        let (model, cv) = select_model(&setup.data, PALATABILITY, &[candidate], setup.folds, seed)?;
        let template = setup.template(model)?;
        let eval = evaluate_prescriptions(
            &template,
            &setup.hull(),
            repetitions,
            seed,
            setup.truth(),
            &setup.options,
        )?;
        let secs = |tr: bool| -> Vec<f64> {
            eval.rows
                .iter()
                .filter(|r| r.trust_region == tr && r.objective.is_some())
                .map(|r| r.seconds)
                .collect()
        };
        let (seconds_mean, seconds_sd) = mean_sd(&secs(false));
        let (seconds_trust_region_mean, seconds_trust_region_sd) = mean_sd(&secs(true));
        rows.push(TrustRegionRow {
            class,
            validation_mse: cv.scores[0].1,
            mse: eval.mse,
            mse_trust_region: eval.mse_trust_region,
            infeasible: eval.infeasible,
            infeasible_trust_region: eval.infeasible_trust_region,
            max_violation: eval.rows.iter().filter_map(|r| r.known_violation).fold(0.0, f64::max),
            seconds_mean,
            seconds_sd,
            seconds_trust_region_mean,
            seconds_trust_region_sd,
            solves: eval.rows,
        });
    }
    Ok(rows)
}

#[derive(Serialize)]
struct TrustRegionTiming {
    class: ModelClass,
    seconds_mean: f64,
    seconds_sd: f64,
    seconds_trust_region_mean: f64,
    seconds_trust_region_sd: f64,
}

pub fn write_trust_region_csv(rows: &[TrustRegionRow], path: &Path) -> Result<(), WfpError> {
    write_csv(rows, path)?;
    write_csv(
        rows.iter().map(|r| TrustRegionTiming {
            class: r.class,
            seconds_mean: r.seconds_mean,
            seconds_sd: r.seconds_sd,
            seconds_trust_region_mean: r.seconds_trust_region_mean,
            seconds_trust_region_sd: r.seconds_trust_region_sd,
        }),
        &crate::timing_path(path),
    )?;
    Ok(())
}

/// Percentile bootstrap interval of the mean at level 95%.
fn bootstrap_ci(values: &[f64], resamples: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let at = |q: f64| means[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    (at(0.025), at(0.975))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusteringRow {
    pub k: usize,
    pub repetitions: usize,
    /// Relative gap `(obj(K) − obj(1)) / max(1, |obj(1)|)`.
    pub gap_mean: f64,
    pub gap_ci_low: f64,
    pub gap_ci_high: f64,
    pub gap_min: f64,
    /// Cluster subproblems that were infeasible, over all repetitions.
    pub infeasible_clusters: usize,
    #[serde(skip)]
    pub max_cluster_seconds_mean: f64,
    #[serde(skip)]
    pub max_cluster_seconds_ci: (f64, f64),
}

/// Trains `class` once, then for each sampled cost vector solves the model
/// with the data clustered into each `K` of `ks` (one hull per cluster) and
/// reports the gap to the single-hull optimum and the longest cluster solve.
pub fn run_clustering_experiment(
    setup: &ExperimentSetup,
    class: ModelClass,
    ks: &[usize],
    repetitions: usize,
    seed: u64,
    threads: usize,
) -> Result<Vec<ClusteringRow>, WfpError> {
    if repetitions == 0 || ks.is_empty() {
        return Err(WfpError::InvalidParameter("need at least one repetition and one K".into()));
    }
    let model = setup.fit(&Candidate::default_for(class))?;
    let mut template = setup.template(model)?;
    template.trust_region = setup.hull();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gaps = vec![Vec::with_capacity(repetitions); ks.len()];
    let mut times = vec![Vec::with_capacity(repetitions); ks.len()];
    let mut infeasible = vec![0; ks.len()];
    for _ in 0..repetitions {
        let mut p = template.clone();
        p.objective = sample_costs(&template.objective, &mut rng);
        let baseline = solve(&p, &setup.options)?.objective;
        for (i, &k) in ks.iter().enumerate() {
            let r = solve_clustered(&p, k, seed, threads, &setup.options)?;
            gaps[i].push((r.best.objective - baseline) / baseline.abs().max(1.0));
            times[i].push(r.max_cluster_seconds);
            infeasible[i] += r.clusters.iter().filter(|c| c.objective.is_none()).count();
        }
    }
    let mut boot = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    Ok(ks
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let (gap_ci_low, gap_ci_high) = bootstrap_ci(&gaps[i], 1000, &mut boot);
            let ci = bootstrap_ci(&times[i], 1000, &mut boot);
            ClusteringRow {
                k,
                repetitions,
                gap_mean: mean_sd(&gaps[i]).0,
                gap_ci_low,
                gap_ci_high,
                gap_min: gaps[i].iter().copied().fold(f64::INFINITY, f64::min),
                infeasible_clusters: infeasible[i],
                max_cluster_seconds_mean: mean_sd(&times[i]).0,
                max_cluster_seconds_ci: ci,
            }
        })
        .collect())
}

#[derive(Serialize)]
struct ClusteringTiming {
    k: usize,
    max_cluster_seconds_mean: f64,
    max_cluster_seconds_ci_low: f64,
    max_cluster_seconds_ci_high: f64,
}

pub fn write_clustering_csv(rows: &[ClusteringRow], path: &Path) -> Result<(), WfpError> {
    write_csv(rows, path)?;
    write_csv(
        rows.iter().map(|r| ClusteringTiming {
            k: r.k,
            max_cluster_seconds_mean: r.max_cluster_seconds_mean,
            max_cluster_seconds_ci_low: r.max_cluster_seconds_ci.0,
            max_cluster_seconds_ci_high: r.max_cluster_seconds_ci.1,
        }),
        &crate::timing_path(path),
    )?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ViolationRow {
    pub alpha: f64,
    pub cost_mean: f64,
    /// Simulated palatability at the prescriptions.
    pub palatability_mean: f64,
    /// Cost of the same instances without the palatability constraint.
    pub unconstrained_cost_mean: f64,
    pub infeasible: usize,
    /// Per-repetition costs, in repetition order; `None` when infeasible.
    #[serde(skip)]
    pub costs: Vec<Option<f64>>,
}

/// Trains a random forest and, for each violation limit `α` in `alphas`,
/// solves `repetitions` sampled cost vectors with at most a fraction `α` of
/// the trees allowed below the palatability threshold.
pub fn run_violation_limit_sweep(
    setup: &ExperimentSetup,
    forest: &ForestParams,
    alphas: &[f64],
    repetitions: usize,
    trust_region: bool,
    seed: u64,
) -> Result<Vec<ViolationRow>, WfpError> {
    if repetitions == 0 {
        return Err(WfpError::InvalidParameter("need at least one repetition".into()));
    }
    let model = PredictiveModel::new(
        PALATABILITY,
        setup.data.feature_space(),
        ModelShape::Forest(train_forest(&setup.data, PALATABILITY, forest)?),
    );
    let mut template = setup.template(model)?;
    if trust_region {
        template.trust_region = setup.hull();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let costs: Vec<_> = (0..repetitions)
        .map(|_| sample_costs(&template.objective, &mut rng))
        .collect();
    let truth = setup.truth();
    let mut free = template.clone();
    free.learned.clear();
    let unconstrained: Vec<f64> = costs
        .par_iter()
        .map(|c| {
            let mut p = free.clone();
            p.objective = c.clone();
            solve(&p, &setup.options).map(|r| r.objective)
        })
        .collect::<Result<_, PipelineError>>()?;
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mut base = template.clone();
        base.learned[0].binding = base.learned[0].binding.clone().with_violation(alpha);
        let solved: Vec<Option<(f64, f64)>> = costs
            .par_iter()
            .map(|c| {
                let mut p = base.clone();
                p.objective = c.clone();
                match solve(&p, &setup.options) {
                    Ok(r) => Ok(Some((r.objective, truth(&r.x, &[])))),
                    Err(PipelineError::Infeasible) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<_, PipelineError>>()?;
        let ok: Vec<(f64, f64)> = solved.iter().flatten().copied().collect();
        let mean = |f: fn(&(f64, f64)) -> f64| mean_sd(&ok.iter().map(f).collect::<Vec<_>>()).0;
        rows.push(ViolationRow {
            alpha,
            cost_mean: mean(|s| s.0),
            palatability_mean: mean(|s| s.1),
            unconstrained_cost_mean: mean_sd(&unconstrained).0,
            infeasible: solved.iter().filter(|s| s.is_none()).count(),
            costs: solved.iter().map(|s| s.map(|v| v.0)).collect(),
        });
    }
    Ok(rows)
}

pub fn write_violation_csv(rows: &[ViolationRow], path: &Path) -> Result<(), WfpError> {
    write_csv(rows, path)?;
    Ok(())
}
