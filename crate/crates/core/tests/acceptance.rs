//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Built with `harness = false` so the report is always
//! printed.

#[path = "../../mio/tests/support/mod.rs"]
mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use conlearn::column_selection::{
    scalability_experiment, scaling_instance, solve_full_hull, solve_with_column_selection, write_scaling_csv,
    ColumnSelectionOptions, SolveMode,
};
use conlearn::data::Dataset;
use conlearn::embed::{OutcomeBinding, Role};
use conlearn::model_ir::{FeatureSpace, Layer, MlpModel, MlpOutput, ModelShape, PredictiveModel};
use conlearn::pipeline::synthetic::leaf_depth_instance;
use conlearn::pipeline::{
    leaf_count_experiment, solve, solve_tree_by_leaves, write_leaf_depth_csv, ConceptualProblem, LearnedOutcome,
    PipelineError,
};
use conlearn::trainers::mlp::{flatten, loss_and_gradient, unflatten};
use conlearn::trainers::{
    train_cart, train_forest, train_gbm, train_linear, train_svc, CartParams, ForestParams, GbmParams, ModelClass,
    SvmParams,
};
use conlearn::trust_region::{hull_membership, kmeans, HullScope, TrustRegionSpec};
use conlearn::wfp::{
    residuals, run_clustering_experiment, run_trust_region_experiment, run_violation_limit_sweep,
    write_clustering_csv, write_trust_region_csv, write_violation_csv, ExperimentSetup, SALT, SUGAR,
};
use conlearn_mio::{solve_mip, MipError, MipOptions, MipStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("MIP exactness", mip_exactness),
        ("embedding fidelity", embedding_fidelity),
        ("tree-leaf decomposition", leaf_decomposition),
        ("trust-region soundness", trust_region_soundness),
        ("column selection", column_selection),
        ("WFP trust-region experiment", wfp_trust_region),
        ("clustering experiment", clustering),
        ("violation-limit sweep", violation_sweep),
        ("MLP gradient check", gradient_check),
        ("determinism", determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {id:>2} PASS  {name} ({secs:.1} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name} ({secs:.1} s): {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

// 1 ---------------------------------------------------------------------

fn mip_exactness() -> Outcome {
    let t = Instant::now();
    let mut feasible = 0;
    for seed in 0..200 {
        let inst = support::random_mixed(seed, 8, 6);
        let oracle = support::brute_force(&inst);
        match (oracle, solve_mip(&inst.model, &MipOptions::default())) {
            (None, Err(MipError::Infeasible)) => {}
            (Some(best), Ok(sol)) => {
                feasible += 1;
                ensure!(sol.status == MipStatus::Optimal, "seed {seed}: status {:?}", sol.status);
                ensure!(
                    (sol.objective - best).abs() <= 1e-6,
                    "seed {seed}: solver {} vs enumeration {best}",
                    sol.objective
                );
            }
            (o, g) => return Err(format!("seed {seed}: enumeration {o:?}, solver {g:?}")),
        }
    }
    let secs = t.elapsed().as_secs_f64();
    ensure!(secs < 60.0, "took {secs:.1} s");
    Ok(format!("200 instances ({feasible} feasible) match enumeration within 1e-6"))
}

// 2 ---------------------------------------------------------------------

const N_X: usize = 3;

fn space() -> FeatureSpace {
    FeatureSpace {
        x_names: (0..N_X).map(|j| format!("x{j}")).collect(),
        w_names: vec!["w0".into()],
        x_bounds: vec![(0.0, 1.0); N_X],
        w_bounds: vec![(0.0, 1.0)],
    }
}

/// Random rows on the unit cube with a nonlinear outcome `y` and a
/// half-space label `label`.
fn random_data(rng: &mut ChaCha8Rng, rows: usize) -> Dataset {
    let a: Vec<f64> = (0..=N_X + 1).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let x: Vec<Vec<f64>> = (0..rows).map(|_| (0..N_X).map(|_| rng.gen()).collect()).collect();
    let w: Vec<Vec<f64>> = (0..rows).map(|_| vec![rng.gen()]).collect();
    let y: Vec<f64> = x
        .iter()
        .zip(&w)
        .map(|(x, w)| (a[0] * x[0]).sin() + a[1] * x[1] * x[2] + a[2] * w[0] + 0.1 * rng.gen::<f64>())
        .collect();
    let margin = |x: &[f64], w: &[f64]| a[3] * (x[0] - 0.5) + a[4] * (x[1] - 0.5) + 0.3 * (w[0] - 0.5);
    let mut label: Vec<f64> = x.iter().zip(&w).map(|(x, w)| f64::from(margin(x, w) >= 0.0)).collect();
    // Both labels must be present.
    label[0] = 0.0;
    label[1] = 1.0;
    Dataset::new(
        space().x_names,
        space().w_names,
        x,
        w,
        vec![("y".into(), y), ("label".into(), label)],
    )
    .expect("consistent dataset")
}

fn random_mlp(rng: &mut ChaCha8Rng, outputs: usize, output: MlpOutput) -> MlpModel {
    let mut layer = |inputs: usize, outs: usize| Layer {
        weights: (0..outs).map(|_| (0..inputs).map(|_| rng.gen_range(-1.5..1.5)).collect()).collect(),
        bias: (0..outs).map(|_| rng.gen_range(-0.5..0.5)).collect(),
    };
    let layers = vec![layer(N_X + 1, 6), layer(6, 5), layer(5, outputs)];
    MlpModel { layers, output }
}

/// Problem over the unit cube with a random linear cost on `x` and one
/// learned outcome.
fn fidelity_problem(rng: &mut ChaCha8Rng, w: f64, shape: ModelShape, role: Role) -> ConceptualProblem {
    let mut p = ConceptualProblem::new(space(), vec![(0.0, 1.0); N_X], vec![w]);
    p.objective = (0..N_X).map(|j| (j, rng.gen_range(-1.0..1.0))).collect();
    p.learned.push(LearnedOutcome {
        model: PredictiveModel::new("y", space(), shape),
        binding: OutcomeBinding::new("y", role),
    });
    p
}

#[derive(Clone, Copy, Debug)]
enum Kind {
    Linear,
    Svc,
    Cart,
    Rf,
    Gbm,
    MlpRegression,
    MlpClassifier,
    Multiclass,
}

fn embedding_fidelity() -> Outcome {
    const MODELS: u64 = 50;
    let kinds = [
        Kind::Linear,
        Kind::Svc,
        Kind::Cart,
        Kind::Rf,
        Kind::Gbm,
        Kind::MlpRegression,
        Kind::MlpClassifier,
        Kind::Multiclass,
    ];
    let t = Instant::now();
    let opts = MipOptions::default();
    let mut worst = Vec::new();
    for kind in kinds {
        let mut max_gap: f64 = 0.0;
        for seed in 0..MODELS {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 * kind as u64 + seed);
            let data = random_data(&mut rng, 80);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let w: f64 = rng.gen();
            // A data point's decision at the problem's context: a threshold
            // or class it meets keeps classifier problems feasible.
            let anchor = |rng: &mut ChaCha8Rng| {
                let mut z = data.x[rng.gen_range(0..data.len())].clone();
                z.push(w);
                z
            };
            let (shape, role, tol) = match kind {
                Kind::Linear => (
                    ModelShape::Linear(train_linear(&data, "y", 0.0).map_err(|e| e.to_string())?),
                    Role::Objective(sign),
                    1e-6,
                ),
                Kind::Svc => (
                    ModelShape::Linear(train_svc(&data, "label", &SvmParams::default()).map_err(|e| e.to_string())?),
                    Role::ClassifierFeasible(0.5),
                    1e-6,
                ),
                Kind::Cart => {
                    let params = CartParams {
                        max_depth: rng.gen_range(1..=5),
                        min_leaf: rng.gen_range(1..=5),
                        ..CartParams::default()
                    };
                    (
                        ModelShape::Tree(train_cart(&data, "y", &params).map_err(|e| e.to_string())?),
                        Role::Objective(sign),
                        1e-6,
                    )
                }
                Kind::Rf => {
                    let params = ForestParams {
                        trees: 5,
                        max_depth: 3,
                        seed,
                        ..ForestParams::default()
                    };
                    (
                        ModelShape::Forest(train_forest(&data, "y", &params).map_err(|e| e.to_string())?),
                        Role::Objective(sign),
                        1e-6,
                    )
                }
                Kind::Gbm => {
                    let params = GbmParams {
                        trees: 8,
                        max_depth: 2,
                        ..GbmParams::default()
                    };
                    (
                        ModelShape::Gbm(train_gbm(&data, "y", &params).map_err(|e| e.to_string())?),
                        Role::Objective(sign),
                        1e-6,
                    )
                }
                Kind::MlpRegression => (
                    ModelShape::Mlp(random_mlp(&mut rng, 1, MlpOutput::Linear)),
                    Role::Objective(sign),
                    1e-5,
                ),
                Kind::MlpClassifier => {
                    let m = random_mlp(&mut rng, 1, MlpOutput::Sigmoid);
                    let tau = (0.9 * m.predict(&anchor(&mut rng))).clamp(0.01, 0.99);
                    (ModelShape::Mlp(m), Role::ClassifierFeasible(tau), 1e-5)
                }
                Kind::Multiclass => {
                    let m = random_mlp(&mut rng, 3, MlpOutput::SoftmaxArgmax);
                    let class = m.predict(&anchor(&mut rng)) as usize;
                    (ModelShape::Mlp(m), Role::ClassTarget(class), 1e-5)
                }
            };
            let p = fidelity_problem(&mut rng, w, shape, role);
            let r = match solve(&p, &opts) {
                Ok(r) => r,
                // Only the SVC can be infeasible: the trained half-space may
                // exclude the whole cube at this context.
                Err(PipelineError::Infeasible) if matches!(kind, Kind::Svc) => continue,
                Err(e) => return Err(format!("{kind:?} seed {seed}: {e}")),
            };
            ensure!(r.optimal, "{kind:?} seed {seed}: not optimal");
            let model = &p.learned[0].model;
            let oracle = model.predict(&r.x, &p.w).map_err(|e| e.to_string())?;
            let z: Vec<f64> = r.x.iter().chain(&p.w).copied().collect();
            let gap = match (kind, role) {
                (Kind::Svc, _) => {
                    ensure!(oracle == 1.0, "{kind:?} seed {seed}: oracle label {oracle}");
                    0.0
                }
                (Kind::MlpClassifier, Role::ClassifierFeasible(tau)) => {
                    ensure!(oracle >= tau - 1e-9, "{kind:?} seed {seed}: probability {oracle} < {tau}");
                    let ModelShape::Mlp(m) = &model.shape else { unreachable!() };
                    (r.outcomes[0].embedded - m.forward(&z).logits[0]).abs()
                }
                (Kind::Multiclass, Role::ClassTarget(k)) => {
                    ensure!(oracle == k as f64, "{kind:?} seed {seed}: class {oracle} instead of {k}");
                    0.0
                }
                _ => r.outcomes[0].gap,
            };
            ensure!(gap <= tol, "{kind:?} seed {seed}: |y* − predict(x*)| = {gap:e}");
            max_gap = max_gap.max(gap);
        }
        worst.push(format!("{kind:?} {max_gap:.1e}"));
    }
    let secs = t.elapsed().as_secs_f64();
    ensure!(secs < 300.0, "took {secs:.1} s");
    Ok(format!("{MODELS} models per class, worst gaps: {}", worst.join(", ")))
}

// 3 ---------------------------------------------------------------------

fn leaf_decomposition() -> Outcome {
    let opts = MipOptions::default();
    let mut compared = 0;
    for seed in 0..30u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut p, data) = leaf_depth_instance(300, seed).map_err(|e| e.to_string())?;
        let params = CartParams {
            max_depth: rng.gen_range(1..=6),
            min_leaf: rng.gen_range(1..=10),
            ..CartParams::default()
        };
        let tree = train_cart(&data, "risk", &params).map_err(|e| e.to_string())?;
        ensure!(tree.depth() <= 6, "depth {}", tree.depth());
        p.learned[0].model.shape = ModelShape::Tree(tree);
        p.learned[0].binding = OutcomeBinding::new("risk", Role::Upper(rng.gen_range(0.3..1.5)));
        match (solve_tree_by_leaves(&p, 1), solve(&p, &opts)) {
            (Ok(l), Ok(m)) => {
                compared += 1;
                ensure!(
                    (l.best.objective - m.objective).abs() <= 1e-6,
                    "seed {seed}: leaves {} vs MIP {}",
                    l.best.objective,
                    m.objective
                );
            }
            (Err(PipelineError::Infeasible), Err(PipelineError::Infeasible)) => {}
            (a, b) => return Err(format!("seed {seed}: leaves {a:?}, MIP {b:?}")),
        }
    }
    let (template, data) = leaf_depth_instance(2000, 7).map_err(|e| e.to_string())?;
    let depths: Vec<usize> = (1..=10).collect();
    let rows = leaf_count_experiment(&template, &data, "risk", &depths, 5, 1, &opts).map_err(|e| e.to_string())?;
    for r in &rows {
        match (r.lp_objective, r.mip_objective) {
            (Some(a), Some(b)) => ensure!((a - b).abs() <= 1e-6, "depth {}: {a} vs {b}", r.max_depth),
            (None, None) => {}
            other => return Err(format!("depth {}: {other:?}", r.max_depth)),
        }
    }
    let admissible: Vec<usize> = rows.iter().map(|r| r.admissible_leaves).collect();
    let objectives: Vec<f64> = rows.iter().filter_map(|r| r.lp_objective).collect();
    ensure!(
        admissible.last() > admissible.first(),
        "admissible leaves do not grow with depth: {admissible:?}"
    );
    // The optimum settles while the number of LPs keeps growing.
    let tail = objectives[objectives.len() - 3..].iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let range = objectives.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    ensure!(
        tail.1 - tail.0 <= 0.25 * (range.1 - range.0).max(1e-9),
        "objective does not settle over the deepest trees: {objectives:?}"
    );
    Ok(format!(
        "{compared} feasible trees agree within 1e-6; LPs per depth {admissible:?}, objectives {:?}",
        objectives.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>()
    ))
}

// 4 ---------------------------------------------------------------------

fn blobs(rng: &mut ChaCha8Rng, dim: usize, per: usize) -> Vec<Vec<f64>> {
    let mut pts = Vec::new();
    for _ in 0..3 {
        let c: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..4.0)).collect();
        for _ in 0..per {
            pts.push(c.iter().map(|v| v + rng.gen_range(-0.6..0.6)).collect());
        }
    }
    pts
}

fn trust_region_soundness() -> Outcome {
    let opts = MipOptions::default();
    let mut solves = 0;
    let mut strict = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = rng.gen_range(2..=4);
        let points = blobs(&mut rng, dim, 20);
        let names: Vec<String> = (0..dim).map(|j| format!("x{j}")).collect();
        let y: Vec<f64> = points.iter().map(|p| p.iter().map(|v| v.sin()).sum()).collect();
        let data = Dataset::new(names, Vec::new(), points.clone(), Vec::new(), vec![("y".into(), y.clone())])
            .map_err(|e| e.to_string())?;
        let features = data.feature_space();
        let shape = if seed % 2 == 0 {
            ModelShape::Linear(train_linear(&data, "y", 0.0).map_err(|e| e.to_string())?)
        } else {
            let params = CartParams {
                max_depth: 3,
                min_leaf: 3,
                ..CartParams::default()
            };
            ModelShape::Tree(train_cart(&data, "y", &params).map_err(|e| e.to_string())?)
        };
        let mut sorted = y.clone();
        sorted.sort_by(f64::total_cmp);
        let mut p = ConceptualProblem::new(features.clone(), features.x_bounds.clone(), Vec::new());
        p.objective = (0..dim).map(|j| (j, rng.gen_range(-1.0..1.0))).collect();
        p.learned.push(LearnedOutcome {
            model: PredictiveModel::new("y", features, shape),
            binding: OutcomeBinding::new("y", Role::Upper(sorted[sorted.len() / 2])),
        });
        let k = 3;
        let cseed = seed + 100;
        let mut single = p.clone();
        single.trust_region = TrustRegionSpec::single(points.clone(), HullScope::XOnly);
        let mut union = p.clone();
        union.trust_region = TrustRegionSpec::union(points.clone(), k, cseed, HullScope::XOnly);
        let rs = solve(&single, &opts).map_err(|e| format!("seed {seed} single: {e}"))?;
        let ru = solve(&union, &opts).map_err(|e| format!("seed {seed} union: {e}"))?;
        solves += 2;
        let inside = |pts: &[Vec<f64>], x: &[f64]| hull_membership(pts, x).map(|m| m.is_member());
        ensure!(
            inside(&points, &rs.x).map_err(|e| e.to_string())?,
            "seed {seed}: single-hull solution outside the hull"
        );
        let clustering = kmeans(&points, k, cseed).map_err(|e| e.to_string())?;
        let c = ru.cluster.ok_or(format!("seed {seed}: no active cluster"))?;
        let members: Vec<Vec<f64>> = clustering.members(c).into_iter().map(|i| points[i].clone()).collect();
        ensure!(
            inside(&members, &ru.x).map_err(|e| e.to_string())?,
            "seed {seed}: union solution outside its cluster's hull"
        );
        ensure!(
            ru.objective >= rs.objective - 1e-6,
            "seed {seed}: union {} below single hull {}",
            ru.objective,
            rs.objective
        );
        if ru.objective > rs.objective + 1e-6 {
            strict += 1;
        }
    }
    Ok(format!(
        "{solves} solves inside their hulls; union strictly worse on {strict} of 50 instances"
    ))
}

// 5 ---------------------------------------------------------------------

/// Indices of the strict vertices of the 2-D hull of `pts` by Andrew's
/// monotone chain; collinear boundary points are dropped.
fn hull_vertices_2d(pts: &[Vec<f64>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    idx.sort_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0]).then(pts[a][1].total_cmp(&pts[b][1])));
    let cross = |o: usize, a: usize, b: usize| {
        (pts[a][0] - pts[o][0]) * (pts[b][1] - pts[o][1]) - (pts[a][1] - pts[o][1]) * (pts[b][0] - pts[o][0])
    };
    let chain = |order: &mut dyn Iterator<Item = usize>| {
        let mut h: Vec<usize> = Vec::new();
        for i in order {
            while h.len() >= 2 && cross(h[h.len() - 2], h[h.len() - 1], i) <= 0.0 {
                h.pop();
            }
            h.push(i);
        }
        h
    };
    let mut out = chain(&mut idx.iter().copied());
    out.extend(chain(&mut idx.iter().rev().copied()));
    out.sort_unstable();
    out.dedup();
    out
}

fn column_selection() -> Outcome {
    let options = ColumnSelectionOptions {
        initial_pool: 20,
        ..ColumnSelectionOptions::default()
    };
    let mut worst: f64 = 0.0;
    for seed in 0..50u64 {
        let problem = scaling_instance(5, 3, 500, seed);
        let full = solve_full_hull(&problem).map_err(|e| e.to_string())?;
        let cs = solve_with_column_selection(&problem, &ColumnSelectionOptions { seed, ..options.clone() })
            .map_err(|e| e.to_string())?;
        let d = (full.objective - cs.solution.objective).abs();
        ensure!(d <= 1e-6, "seed {seed}: full {} vs selected {}", full.objective, cs.solution.objective);
        worst = worst.max(d);
    }
    let mut checked = 0;
    for seed in 0..20u64 {
        let problem = scaling_instance(2, 2, 300, seed);
        let vertices = hull_vertices_2d(&problem.points);
        let cs = solve_with_column_selection(
            &problem,
            &ColumnSelectionOptions {
                initial_pool: 3,
                seed,
                ..ColumnSelectionOptions::default()
            },
        )
        .map_err(|e| e.to_string())?;
        for it in &cs.audit {
            for &i in &it.selected {
                ensure!(vertices.contains(&i), "seed {seed}: priced column {i} is not a hull vertex");
                checked += 1;
            }
        }
    }
    let rows = scalability_experiment(10, 5, &[5_000, 50_000], &[0], &ColumnSelectionOptions::default())
        .map_err(|e| e.to_string())?;
    let time = |n: usize, mode: SolveMode| {
        rows.iter()
            .find(|r| r.samples == n && r.mode == mode)
            .map(|r| r.wall_seconds)
            .unwrap_or(f64::NAN)
    };
    let (cs_big, full_small) = (time(50_000, SolveMode::ColumnSelection), time(5_000, SolveMode::Full));
    ensure!(
        cs_big < full_small,
        "with selection at N=50000 took {cs_big:.3} s, without at N=5000 took {full_small:.3} s"
    );
    Ok(format!(
        "50 instances agree (worst {worst:.1e}); {checked} priced 2-D columns are hull vertices; \
         N=50000 with selection {cs_big:.3} s < N=5000 full {full_small:.3} s"
    ))
}

// 6 ---------------------------------------------------------------------

fn wfp_trust_region() -> Outcome {
    let t = Instant::now();
    let setup = ExperimentSetup::new(20_000, 1, 1).map_err(|e| e.to_string())?;
    let classes = [ModelClass::Linear, ModelClass::Cart];
    let rows = run_trust_region_experiment(&setup, &classes, 50, 11).map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    for r in &rows {
        ensure!(
            r.mse_trust_region <= r.mse,
            "{:?}: MSE with trust region {} above {}",
            r.class,
            r.mse_trust_region,
            r.mse
        );
        ensure!(r.max_violation <= 1e-7, "{:?}: known-row violation {:e}", r.class, r.max_violation);
        detail.push(format!(
            "{} MSE {:.4} -> {:.4} (infeasible {}/{})",
            r.class.name(),
            r.mse,
            r.mse_trust_region,
            r.infeasible,
            r.infeasible_trust_region
        ));
    }
    // Independent residual check of the prescriptions themselves.
    let salt = setup.tables.food_index(SALT).expect("salt");
    let sugar = setup.tables.food_index(SUGAR).expect("sugar");
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    for &class in &classes {
        let (model, _) = conlearn::trainers::select_model(
            &setup.data,
            conlearn::wfp::PALATABILITY,
            &[conlearn::trainers::Candidate::default_for(class)],
            setup.folds,
            11,
        )
        .map_err(|e| e.to_string())?;
        let template = setup.template(model).map_err(|e| e.to_string())?;
        for rep in 0..10 {
            let mut p = template.clone();
            p.objective = conlearn::pipeline::sample_costs(&template.objective, &mut rng);
            if rep % 2 == 1 {
                p.trust_region = setup.hull();
            }
            let r = match solve(&p, &setup.options) {
                Ok(r) => r,
                Err(PipelineError::Infeasible) => continue,
                Err(e) => return Err(e.to_string()),
            };
            let res = residuals(&setup.network, &setup.tables, &r);
            ensure!(res.max() <= 1e-7, "{class:?}: residuals {res:?}");
            ensure!(r.x[salt] == 5.0 && r.x[sugar] == 20.0, "salt {} sugar {}", r.x[salt], r.x[sugar]);
            let energy = setup.tables.intake(&r.x)[0];
            ensure!(energy >= 2100.0 - 1e-7, "energy {energy}");
            ensure!(
                r.outcomes[0].embedded >= setup.threshold - 1e-6,
                "palatability {} below threshold",
                r.outcomes[0].embedded
            );
            checked += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    ensure!(secs < 600.0, "took {secs:.1} s");
    Ok(format!(
        "N=20000, R=50: {}; {checked} prescriptions pass residuals, salt, sugar and energy",
        detail.join("; ")
    ))
}

// 7 ---------------------------------------------------------------------

fn clustering() -> Outcome {
    let setup = ExperimentSetup::new(20_000, 1, 1).map_err(|e| e.to_string())?;
    let ks = [1, 5, 10, 20];
    let rows = run_clustering_experiment(&setup, ModelClass::Cart, &ks, 3, 21, 1).map_err(|e| e.to_string())?;
    for r in &rows {
        ensure!(r.gap_min >= -1e-6, "K={}: gap {}", r.k, r.gap_min);
    }
    ensure!(rows[0].gap_mean.abs() <= 1e-6, "gap at K=1 is {}", rows[0].gap_mean);
    let times: Vec<f64> = rows.iter().map(|r| r.max_cluster_seconds_mean).collect();
    ensure!(
        times[3] < times[0],
        "max cluster time does not fall from K=1 to K=20: {times:?}"
    );
    Ok(rows
        .iter()
        .map(|r| format!("K={} gap {:.4} max-cluster {:.3} s", r.k, r.gap_mean, r.max_cluster_seconds_mean))
        .collect::<Vec<_>>()
        .join(", "))
}

// 8 ---------------------------------------------------------------------

fn sweep_forest() -> ForestParams {
    ForestParams {
        trees: 5,
        max_depth: 3,
        min_leaf: 20,
        seed: 3,
        ..ForestParams::default()
    }
}

fn violation_sweep() -> Outcome {
    let setup = ExperimentSetup::new(2_000, 1, 1).map_err(|e| e.to_string())?;
    let alphas = [0.0, 0.25, 0.5, 0.75, 1.0];
    let rows = run_violation_limit_sweep(&setup, &sweep_forest(), &alphas, 10, false, 31).map_err(|e| e.to_string())?;
    // Compare per cost vector, so the check does not depend on averaging.
    for w in rows.windows(2) {
        for (rep, (a, b)) in w[0].costs.iter().zip(&w[1].costs).enumerate() {
            if let (Some(a), Some(b)) = (a, b) {
                ensure!(
                    *b <= a + 1e-6,
                    "repetition {rep}: cost rises from {a} at α={} to {b} at α={}",
                    w[0].alpha,
                    w[1].alpha
                );
            } else if a.is_some() {
                return Err(format!("repetition {rep}: infeasible at α={} after feasible", w[1].alpha));
            }
        }
    }
    let last = rows.last().expect("rows");
    ensure!(
        (last.cost_mean - last.unconstrained_cost_mean).abs() <= 1e-6,
        "α=1 cost {} vs unconstrained {}",
        last.cost_mean,
        last.unconstrained_cost_mean
    );
    Ok(rows
        .iter()
        .map(|r| format!("α={} cost {:.1}", r.alpha, r.cost_mean))
        .collect::<Vec<_>>()
        .join(", "))
}

// 9 ---------------------------------------------------------------------

fn gradient_check() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let output = if seed % 2 == 0 { MlpOutput::Linear } else { MlpOutput::Sigmoid };
        let model = random_mlp(&mut rng, 1, output);
        let z: Vec<Vec<f64>> = (0..40).map(|_| (0..=N_X).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = (0..40)
            .map(|_| if output == MlpOutput::Sigmoid { f64::from(rng.gen_bool(0.5)) } else { rng.gen() })
            .collect();
        let theta = flatten(&model);
        let (_, grad) = loss_and_gradient(&model, &z, &y);
        let loss_at = |t: &[f64]| loss_and_gradient(&unflatten(&model, t), &z, &y).0;
        for _ in 0..10 {
            let k = rng.gen_range(0..theta.len());
            let h = 1e-6;
            let mut plus = theta.clone();
            plus[k] += h;
            let mut minus = theta.clone();
            minus[k] -= h;
            let fd = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-6);
            ensure!(rel <= 1e-4, "seed {seed} coordinate {k}: analytic {} vs numeric {fd}", grad[k]);
            worst = worst.max(rel);
        }
    }
    Ok(format!("50 coordinates over 5 networks, worst relative error {worst:.1e}"))
}

// 10 --------------------------------------------------------------------

fn run_all_experiments(dir: &Path) -> Result<(), String> {
    let e = |e: &dyn std::fmt::Display| e.to_string();
    let setup = ExperimentSetup::new(1_000, 5, 5).map_err(|x| e(&x))?;
    let rows = run_trust_region_experiment(&setup, &[ModelClass::Linear, ModelClass::Cart], 3, 5).map_err(|x| e(&x))?;
    write_trust_region_csv(&rows, &dir.join("wfp_tr.csv")).map_err(|x| e(&x))?;
    let rows = run_clustering_experiment(&setup, ModelClass::Cart, &[1, 3], 2, 5, 1).map_err(|x| e(&x))?;
    write_clustering_csv(&rows, &dir.join("wfp_cluster.csv")).map_err(|x| e(&x))?;
    let rows = run_violation_limit_sweep(&setup, &sweep_forest(), &[0.0, 0.5, 1.0], 2, false, 5).map_err(|x| e(&x))?;
    write_violation_csv(&rows, &dir.join("wfp_alpha.csv")).map_err(|x| e(&x))?;
    let rows = scalability_experiment(5, 3, &[200, 400], &[0, 1], &ColumnSelectionOptions::default()).map_err(|x| e(&x))?;
    write_scaling_csv(&rows, &dir.join("cs_scaling.csv")).map_err(|x| e(&x))?;
    let (template, data) = leaf_depth_instance(500, 5).map_err(|x| e(&x))?;
    let rows = leaf_count_experiment(&template, &data, "risk", &[1, 2, 3, 4], 5, 1, &MipOptions::default())
        .map_err(|x| e(&x))?;
    write_leaf_depth_csv(&rows, &dir.join("leaf_depth.csv")).map_err(|x| e(&x))?;
    Ok(())
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_all_experiments(a.path())?;
    run_all_experiments(b.path())?;
    let files = ["wfp_tr.csv", "wfp_cluster.csv", "wfp_alpha.csv", "cs_scaling.csv", "leaf_depth.csv"];
    for f in files {
        let x = std::fs::read(a.path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        let y = std::fs::read(b.path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        ensure!(!x.is_empty(), "{f} is empty");
        ensure!(x == y, "{f} differs between runs");
    }
    Ok(format!("{} experiment CSVs byte-identical across two runs", files.len()))
}
