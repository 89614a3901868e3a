//! Command implementations. Each writes its machine-readable result under
//! the output directory and prints a short summary to stdout.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use conlearn::column_selection::{
    scalability_experiment, solve_with_column_selection, write_scaling_csv, ColumnSelectionOptions, HullProblem,
};
use conlearn::data::Dataset;
use conlearn::model_ir::{from_document, to_document, PredictiveModel, Task};
use conlearn::pipeline::synthetic::{leaf_depth_instance, multi_constraint_instance};
use conlearn::pipeline::{
    assemble, leaf_count_experiment, sample_costs, solve_clustered, solve_tree_by_leaves, write_leaf_depth_csv,
    ConceptualProblem, OutcomeReport, SolveReport, Timing,
};
use conlearn::trainers::{fit_candidate, select_model, Candidate, ForestParams, ModelClass};
use conlearn::trust_region::{HullScope, HullTarget, TrustRegionSpec};
use conlearn::wfp::{
    generate_dataset, residuals, run_clustering_experiment, run_trust_region_experiment, run_violation_limit_sweep,
    write_clustering_csv, write_trust_region_csv, write_violation_csv, ExperimentSetup, NutritionTables, Residuals,
    SupplyNetwork, PALATABILITY,
};
use conlearn_mio::{export_lp_file, MipOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{existing, FileConfig, Instance, Mode, Policy, Suite};
use crate::{Cli, CliError, DataArgs, ExperimentArgs, ExportArgs, ProblemArgs, SolveArgs, TrainArgs};

/// Version of the JSON result documents.
pub const SCHEMA_VERSION: u32 = 1;

/// First of `cli`, `file`, `default`.
fn pick<T>(cli: Option<T>, file: Option<T>, default: T) -> T {
    cli.or(file).unwrap_or(default)
}

pub struct Context {
    pub file: FileConfig,
    pub out: PathBuf,
    pub threads: usize,
    pub seed: u64,
}

impl Context {
    pub fn new(cli: &Cli, file: FileConfig) -> Result<Self, CliError> {
        let out = pick(cli.out.clone(), file.out.clone(), PathBuf::from("out"));
        let threads = pick(cli.threads, file.threads, 1);
        if threads == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Threads(e.to_string()))?;
        std::fs::create_dir_all(&out).map_err(|source| CliError::Io {
            path: out.display().to_string(),
            source,
        })?;
        Ok(Self {
            seed: pick(cli.seed, file.seed, 0),
            file,
            out,
            threads,
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

/// The dataset named by the flags or config, or simulated baskets.
fn load_data(ctx: &Context, a: &DataArgs, default_samples: usize) -> Result<(Dataset, String), CliError> {
    let f = &ctx.file.data;
    let csv = a.data.clone().or(f.csv.clone());
    let outcome = a.outcome.clone().or(f.outcome.clone());
    match csv {
        Some(csv) => {
            let manifest = a
                .manifest
                .clone()
                .or(f.manifest.clone())
                .ok_or_else(|| CliError::Config("a dataset CSV needs --manifest".into()))?;
            let data = Dataset::load(existing(&csv)?, existing(&manifest)?)?;
            let outcome = match outcome {
                Some(o) => o,
                None => data
                    .outcome_names()
                    .next()
                    .ok_or_else(|| CliError::Config("the dataset has no outcome column".into()))?
                    .to_string(),
            };
            Ok((data, outcome))
        }
        None => {
            let samples = pick(a.samples, f.samples, default_samples);
            let seed = pick(a.data_seed, f.seed, 1);
            let data = generate_dataset(&NutritionTables::shipped(), samples, seed)?;
            Ok((data, outcome.unwrap_or_else(|| PALATABILITY.into())))
        }
    }
}

pub fn train(ctx: &Context, a: &TrainArgs) -> Result<(), CliError> {
    let (data, outcome) = load_data(ctx, &a.data, 2000)?;
    let classes = pick(
        a.classes.clone(),
        ctx.file.model.classes.clone(),
        vec![ModelClass::Linear, ModelClass::Cart],
    );
    let folds = pick(a.folds, ctx.file.model.folds, 5);
    let candidates: Vec<Candidate> = classes.iter().map(|&c| Candidate::default_for(c)).collect();
    let (model, cv) = select_model(&data, &outcome, &candidates, folds, ctx.seed)?;
    let model_path = ctx.path(&format!("{outcome}_model.json"));
    write_text(&model_path, &to_document(&model))?;
    #[derive(Serialize)]
    struct Report<'a> {
        schema_version: u32,
        outcome: &'a str,
        rows: usize,
        cv: &'a conlearn::trainers::CvReport,
    }
    write_json(
        &ctx.path(&format!("{outcome}_cv.json")),
        &Report {
            schema_version: SCHEMA_VERSION,
            outcome: &outcome,
            rows: data.len(),
            cv: &cv,
        },
    )?;
    println!("trained `{outcome}` on {} rows with {folds}-fold cross-validation", data.len());
    for (class, score) in &cv.scores {
        println!("  {:<6} {score:.6}", class.name());
    }
    println!("chose {}; model written to {}", cv.chosen.name(), model_path.display());
    Ok(())
}

/// A problem ready to solve, with what is needed to report on it.
struct Built {
    instance: Instance,
    problem: ConceptualProblem,
    wfp: Option<(SupplyNetwork, NutritionTables)>,
}

fn mip_options(ctx: &Context, a: &ProblemArgs) -> MipOptions {
    let limit = a.time_limit.or(ctx.file.solve.time_limit);
    MipOptions {
        time_limit: limit.map(Duration::from_secs_f64),
        ..MipOptions::default()
    }
}

fn build(ctx: &Context, a: &ProblemArgs) -> Result<Built, CliError> {
    let f = &ctx.file;
    let s = &f.solve;
    let instance = pick(a.instance, s.instance, Instance::Wfp);
    let samples = pick(a.data.samples, f.data.samples, 2000);
    let data_seed = pick(a.data.data_seed, f.data.seed, 1);
    let document = a.model.clone().or(f.model.document.clone());
    let class = a
        .class
        .or_else(|| f.model.classes.as_ref().and_then(|c| c.first().copied()));
    let load_model = |data: &Dataset, outcome: &str, default: ModelClass| -> Result<PredictiveModel, CliError> {
        match &document {
            Some(p) => {
                let text = std::fs::read_to_string(existing(p)?).map_err(|source| CliError::Io {
                    path: p.display().to_string(),
                    source,
                })?;
                Ok(from_document(&text)?)
            }
            None => {
                let c = Candidate::default_for(class.unwrap_or(default));
                let shape = fit_candidate(&c, data, outcome, Task::Regression)?;
                Ok(PredictiveModel::new(outcome, data.feature_space(), shape))
            }
        }
    };
    let (mut problem, points, scope, wfp) = match instance {
        Instance::Wfp => {
            let mut setup = ExperimentSetup::new(samples, data_seed, pick(a.network_seed, s.network_seed, 1))?;
            if let Some(t) = a.threshold.or(s.threshold) {
                setup.threshold = t;
            }
            let model = load_model(&setup.data, PALATABILITY, ModelClass::Linear)?;
            let p = setup.template(model)?;
            (p, setup.data.x, HullScope::XOnly, Some((setup.network, setup.tables)))
        }
        Instance::LeafDepth => {
            let (mut p, data) = leaf_depth_instance(samples, data_seed)?;
            p.learned[0].model = load_model(&data, "risk", ModelClass::Cart)?;
            if let Some(t) = a.threshold.or(s.threshold) {
                p.learned[0].binding.role = conlearn::embed::Role::Upper(t);
            }
            (p, data.x, HullScope::XOnly, None)
        }
        Instance::Regimen => {
            if document.is_some() {
                return Err(CliError::Config("the regimen instance trains its own models".into()));
            }
            let (p, _) = multi_constraint_instance(samples, data_seed)?;
            let points = p.trust_region.points.clone();
            (p, points, HullScope::Joint, None)
        }
    };
    if let Some(alpha) = a.alpha.or(s.alpha) {
        let b = &mut problem.learned[0].binding;
        *b = b.clone().with_violation(alpha);
    }
    let k = pick(a.k, s.k, 5);
    problem.trust_region = match pick(a.trust_region, s.trust_region, Policy::Single) {
        Policy::None => TrustRegionSpec::none(),
        Policy::Single => TrustRegionSpec::single(points, scope),
        Policy::Union => TrustRegionSpec::union(points, k, ctx.seed, scope),
    };
    if let Some(seed) = a.cost_seed.or(s.cost_seed) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        problem.objective = sample_costs(&problem.objective, &mut rng);
    }
    Ok(Built {
        instance,
        problem,
        wfp,
    })
}

/// Solves the problem as one LP with the hull weights priced in on demand.
fn solve_by_column_selection(ctx: &Context, p: &ConceptualProblem) -> Result<SolveReport, CliError> {
    if p.trust_region.points.is_empty() {
        return Err(CliError::Config("column selection needs a trust region".into()));
    }
    let mut bare = p.clone();
    bare.trust_region = TrustRegionSpec::none();
    let t0 = Instant::now();
    let asm = assemble(&bare)?;
    let assemble_seconds = t0.elapsed().as_secs_f64();
    let mut targets: Vec<HullTarget> = asm.x.iter().map(|&v| HullTarget::Var(v)).collect();
    if p.trust_region.scope == HullScope::Joint {
        targets.extend(p.w.iter().map(|&w| HullTarget::Fixed(w)));
    }
    let hull = HullProblem {
        model: asm.model.clone(),
        points: p.trust_region.scoped_points(p.n()),
        targets,
    };
    let t1 = Instant::now();
    let out = solve_with_column_selection(
        &hull,
        &ColumnSelectionOptions {
            seed: ctx.seed,
            ..ColumnSelectionOptions::default()
        },
    )?;
    let primal = &out.solution.primal;
    let x: Vec<f64> = asm.x.iter().map(|v| primal[v.0]).collect();
    let extra: Vec<f64> = asm.extra.iter().map(|v| primal[v.0]).collect();
    let mut outcomes = Vec::new();
    for (l, art) in p.learned.iter().zip(&asm.outcomes) {
        let embedded = primal[art.outcome.0];
        let oracle = l.model.predict(&x, &p.w).map_err(|e| CliError::Config(e.to_string()))?;
        outcomes.push(OutcomeReport {
            outcome: l.binding.outcome.clone(),
            embedded,
            oracle,
            gap: (embedded - oracle).abs(),
        });
    }
    Ok(SolveReport {
        optimal: true,
        objective: out.solution.objective,
        x,
        extra,
        outcomes,
        cluster: None,
        nodes: out.pricing_iterations(),
        timing: Timing {
            assemble_seconds,
            solve_seconds: t1.elapsed().as_secs_f64(),
        },
    })
}

#[derive(Serialize)]
struct Named {
    name: String,
    value: f64,
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    schema_version: u32,
    instance: Instance,
    mode: Mode,
    optimal: bool,
    objective: f64,
    x: Vec<Named>,
    outcomes: &'a [OutcomeReport],
    cluster: Option<usize>,
    nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    residuals: Option<Residuals>,
}

pub fn solve(ctx: &Context, a: &SolveArgs) -> Result<(), CliError> {
    let built = build(ctx, &a.problem)?;
    let mode = pick(a.mode, ctx.file.solve.mode, Mode::Monolithic);
    let opts = mip_options(ctx, &a.problem);
    let p = &built.problem;
    let k = pick(a.problem.k, ctx.file.solve.k, 5);
    let t = Instant::now();
    let report = match mode {
        Mode::Monolithic => conlearn::pipeline::solve(p, &opts)?,
        Mode::Clustered => solve_clustered(p, k, ctx.seed, ctx.threads, &opts)?.best,
        Mode::Leaves => solve_tree_by_leaves(p, ctx.threads)?.best,
        Mode::ColumnSelection => solve_by_column_selection(ctx, p)?,
    };
    let seconds = t.elapsed().as_secs_f64();
    let residuals = built.wfp.as_ref().map(|(net, tables)| residuals(net, tables, &report));
    let names = p.features.x_names.iter();
    let out = SolveOutput {
        schema_version: SCHEMA_VERSION,
        instance: built.instance,
        mode,
        optimal: report.optimal,
        objective: report.objective,
        x: names
            .zip(&report.x)
            .map(|(n, &v)| Named {
                name: n.clone(),
                value: v,
            })
            .collect(),
        outcomes: &report.outcomes,
        cluster: report.cluster,
        nodes: report.nodes,
        residuals,
    };
    let path = ctx.path("solve_report.json");
    write_json(&path, &out)?;
    println!(
        "{:?} solve of the {:?} instance: objective {:.6} ({}) in {seconds:.3} s",
        mode,
        built.instance,
        report.objective,
        if report.optimal { "optimal" } else { "best found" }
    );
    for o in &report.outcomes {
        println!("  {} = {:.6} (model says {:.6})", o.outcome, o.embedded, o.oracle);
    }
    if let Some(r) = &out.residuals {
        println!("  largest constraint residual {:.2e}", r.max());
    }
    println!("report written to {}", path.display());
    Ok(())
}

pub fn export(ctx: &Context, a: &ExportArgs) -> Result<(), CliError> {
    let built = build(ctx, &a.problem)?;
    let asm = assemble(&built.problem)?;
    let path = a.lp.clone().unwrap_or_else(|| ctx.path("model.lp"));
    export_lp_file(&asm.model, &path)?;
    println!(
        "wrote {} variables and {} rows to {}",
        asm.model.num_vars(),
        asm.model.constraints().len(),
        path.display()
    );
    Ok(())
}

pub fn experiment(ctx: &Context, a: &ExperimentArgs) -> Result<(), CliError> {
    let f = &ctx.file.experiment;
    let suite = a
        .suite
        .or(f.suite)
        .ok_or_else(|| CliError::Config("name an experiment suite".into()))?;
    let samples = pick(a.samples, ctx.file.data.samples, 20_000);
    let data_seed = pick(a.data_seed, ctx.file.data.seed, 1);
    let network_seed = pick(a.network_seed, ctx.file.solve.network_seed, 1);
    let setup = || -> Result<ExperimentSetup, CliError> {
        let mut s = ExperimentSetup::new(samples, data_seed, network_seed)?;
        if let Some(t) = a.threshold.or(ctx.file.solve.threshold) {
            s.threshold = t;
        }
        Ok(s)
    };
    let classes = a.classes.clone().or(f.classes.clone());
    let t = Instant::now();
    let path = match suite {
        Suite::WfpTr => {
            let classes = classes.unwrap_or(vec![ModelClass::Linear, ModelClass::Cart]);
            let reps = pick(a.repetitions, f.repetitions, 50);
            let rows = run_trust_region_experiment(&setup()?, &classes, reps, ctx.seed)?;
            let path = ctx.path("wfp_tr.csv");
            write_trust_region_csv(&rows, &path)?;
            for r in &rows {
                println!(
                    "{:<6} validation {:.4}  MSE {:.4}  with trust region {:.4}  infeasible {}/{}",
                    r.class.name(),
                    r.validation_mse,
                    r.mse,
                    r.mse_trust_region,
                    r.infeasible,
                    r.infeasible_trust_region
                );
            }
            path
        }
        Suite::WfpCluster => {
            let class = classes.and_then(|c| c.first().copied()).unwrap_or(ModelClass::Cart);
            let ks = a.ks.clone().or(f.ks.clone()).unwrap_or(vec![1, 5, 10, 20]);
            let reps = pick(a.repetitions, f.repetitions, 5);
            let rows = run_clustering_experiment(&setup()?, class, &ks, reps, ctx.seed, ctx.threads)?;
            let path = ctx.path("wfp_cluster.csv");
            write_clustering_csv(&rows, &path)?;
            for r in &rows {
                println!(
                    "K={:<3} gap {:.5} [{:.5}, {:.5}]  longest cluster {:.3} s",
                    r.k, r.gap_mean, r.gap_ci_low, r.gap_ci_high, r.max_cluster_seconds_mean
                );
            }
            path
        }
        Suite::WfpAlpha => {
            let forest = ForestParams {
                trees: pick(a.trees, f.trees, 5),
                max_depth: pick(a.max_depth, f.max_depth, 3),
                min_leaf: pick(a.min_leaf, f.min_leaf, 20),
                seed: ctx.seed,
                ..ForestParams::default()
            };
            let alphas = a.alphas.clone().or(f.alphas.clone()).unwrap_or(vec![0.0, 0.25, 0.5, 0.75, 1.0]);
            let reps = pick(a.repetitions, f.repetitions, 10);
            let tr = pick(a.trust_region, f.trust_region, false);
            let rows = run_violation_limit_sweep(&setup()?, &forest, &alphas, reps, tr, ctx.seed)?;
            let path = ctx.path("wfp_alpha.csv");
            write_violation_csv(&rows, &path)?;
            for r in &rows {
                println!(
                    "alpha {:.2}  cost {:.2}  palatability {:.4}  infeasible {}",
                    r.alpha, r.cost_mean, r.palatability_mean, r.infeasible
                );
            }
            path
        }
        Suite::CsScaling => {
            let sizes = a.sizes.clone().or(f.sizes.clone()).unwrap_or(vec![1_000, 5_000, 10_000, 50_000]);
            let reps = pick(a.repetitions, f.repetitions, 3) as u64;
            let seeds: Vec<u64> = (0..reps).map(|r| ctx.seed + r).collect();
            let rows = scalability_experiment(
                pick(a.features, f.features, 10),
                pick(a.rows, f.rows, 5),
                &sizes,
                &seeds,
                &ColumnSelectionOptions::default(),
            )?;
            let path = ctx.path("cs_scaling.csv");
            write_scaling_csv(&rows, &path)?;
            for r in &rows {
                println!(
                    "N={:<7} {:?} seed {}  objective {:.6}  pool {}  {:.3} s",
                    r.samples, r.mode, r.seed, r.objective, r.pool_size, r.wall_seconds
                );
            }
            path
        }
        Suite::LeafDepth => {
            let samples = pick(a.samples, ctx.file.data.samples, 2_000);
            let depths = a.depths.clone().or(f.depths.clone()).unwrap_or((1..=10).collect());
            let (template, data) = leaf_depth_instance(samples, data_seed)?;
            let rows = leaf_count_experiment(
                &template,
                &data,
                "risk",
                &depths,
                pick(a.min_leaf, f.min_leaf, 5),
                ctx.threads,
                &MipOptions::default(),
            )?;
            let path = ctx.path("leaf_depth.csv");
            write_leaf_depth_csv(&rows, &path)?;
            for r in &rows {
                println!(
                    "depth {:<2} leaves {:<4} LPs {:<4} objective {:?}  {:.3} s by leaves, {:.3} s as one MIP",
                    r.max_depth, r.leaves, r.admissible_leaves, r.lp_objective, r.lp_seconds, r.mip_seconds
                );
            }
            path
        }
    };
    println!(
        "{suite:?} finished in {:.1} s; results in {} (wall times in {})",
        t.elapsed().as_secs_f64(),
        path.display(),
        conlearn::timing_path(&path).display()
    );
    Ok(())
}
