//! Ration model solves checked against independently recomputed residuals.

use conlearn::pipeline::{sample_costs, solve};
use conlearn::trainers::{train_linear, ForestParams};
use conlearn::model_ir::{ModelShape, PredictiveModel};
use conlearn::wfp::{
    basket_groups, ground_truth_palatability, residuals, run_violation_limit_sweep, ExperimentSetup,
    NutritionTables, SupplyNetwork, WfpError, PALATABILITY, SALT, SUGAR,
};
use rand::SeedableRng;

fn linear_setup() -> (ExperimentSetup, PredictiveModel) {
    let setup = ExperimentSetup::new(1_000, 2, 2).unwrap();
    let model = PredictiveModel::new(
        PALATABILITY,
        setup.data.feature_space(),
        ModelShape::Linear(train_linear(&setup.data, PALATABILITY, 1e-8).unwrap()),
    );
    (setup, model)
}

#[test]
fn prescriptions_satisfy_every_constraint_family() {
    let (setup, model) = linear_setup();
    let template = setup.template(model).unwrap();
    let salt = setup.tables.food_index(SALT).unwrap();
    let sugar = setup.tables.food_index(SUGAR).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    for trust_region in [false, true] {
        for _ in 0..4 {
            let mut p = template.clone();
            p.objective = sample_costs(&template.objective, &mut rng);
            if trust_region {
                p.trust_region = setup.hull();
            }
            let r = solve(&p, &setup.options).unwrap();
            let res = residuals(&setup.network, &setup.tables, &r);
            assert!(res.max() <= 1e-7, "{res:?}");
            assert_eq!(r.x[salt], 5.0);
            assert_eq!(r.x[sugar], 20.0);
            assert!(setup.tables.intake(&r.x)[0] >= 2100.0 - 1e-7);
            assert!(r.outcomes[0].embedded >= setup.threshold - 1e-6);
            assert!(r.outcomes[0].gap <= 1e-6);
        }
    }
}

#[test]
fn scaling_a_basket_changes_its_score() {
    let t = NutritionTables::shipped();
    let groups = basket_groups(&t.foods);
    let mut x = vec![0.0; t.foods.len()];
    x[t.food_index("Maize").unwrap()] = 60.0;
    x[t.food_index("Beans").unwrap()] = 25.0;
    x[t.food_index("Oil").unwrap()] = 6.0;
    let small = ground_truth_palatability(&x, &groups);
    let big: Vec<f64> = x.iter().map(|v| 10.0 * v).collect();
    let big = ground_truth_palatability(&big, &groups);
    assert!((big - small).abs() > 0.05, "{small} vs {big}");
}

#[test]
fn unreachable_delivery_node_is_rejected() {
    let t = NutritionTables::shipped();
    let mut net = SupplyNetwork::default_instance(t.foods.len(), 0);
    let last = net.nodes.len() - 1;
    net.arcs.retain(|a| a.to != last);
    assert!(matches!(net.validate(t.foods.len()), Err(WfpError::NetworkDisconnected(_))));
}

#[test]
fn full_violation_limit_matches_the_unconstrained_cost() {
    let setup = ExperimentSetup::new(600, 3, 3).unwrap();
    let forest = ForestParams {
        trees: 3,
        max_depth: 2,
        min_leaf: 20,
        ..ForestParams::default()
    };
    let rows = run_violation_limit_sweep(&setup, &forest, &[0.0, 1.0], 2, false, 1).unwrap();
    assert!(rows[1].cost_mean <= rows[0].cost_mean + 1e-6);
    assert!((rows[1].cost_mean - rows[1].unconstrained_cost_mean).abs() <= 1e-6);
}
