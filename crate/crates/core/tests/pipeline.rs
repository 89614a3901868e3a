//! End-to-end pipeline solves on the synthetic instances.

use conlearn::pipeline::synthetic::{leaf_depth_instance, multi_constraint_instance, regimen_truth};
use conlearn::pipeline::{assemble, known_row_violation, solve, solve_clustered, solve_tree_by_leaves};
use conlearn::model_ir::ModelShape;
use conlearn::trainers::{train_cart, CartParams};
use conlearn::trust_region::{hull_membership, HullScope, TrustRegionSpec};
use conlearn_mio::{read_lp_file, solve_mip, export_lp_file, MipOptions};

#[test]
fn multi_constraint_solution_is_consistent_with_every_model() {
    let (p, _) = multi_constraint_instance(300, 1).unwrap();
    let r = solve(&p, &MipOptions::default()).unwrap();
    assert!(r.optimal);
    assert!(known_row_violation(&p, &r.x, &r.extra) <= 1e-7);
    for o in &r.outcomes {
        assert!(o.gap <= 1e-6, "{o:?}");
    }
    let active = r.x.iter().filter(|&&d| d > 1e-7).count();
    assert!(active <= 3, "{:?}", r.x);
    let (efficacy, _, _) = regimen_truth(&r.x, &p.w);
    assert!(efficacy.is_finite());
    let z: Vec<f64> = r.x.iter().chain(&p.w).copied().collect();
    assert!(hull_membership(&p.trust_region.points, &z).unwrap().is_member());
}

#[test]
fn one_cluster_reproduces_the_single_hull() {
    let (mut p, data) = leaf_depth_instance(200, 3).unwrap();
    p.learned[0].model.shape = ModelShape::Tree(train_cart(&data, "risk", &CartParams::default()).unwrap());
    p.trust_region = TrustRegionSpec::single(data.x.clone(), HullScope::XOnly);
    let single = solve(&p, &MipOptions::default()).unwrap();
    let clustered = solve_clustered(&p, 1, 0, 1, &MipOptions::default()).unwrap();
    assert!((single.objective - clustered.best.objective).abs() <= 1e-9);
    let four = solve_clustered(&p, 4, 0, 1, &MipOptions::default()).unwrap();
    assert!(four.best.objective >= single.objective - 1e-6);
    assert_eq!(four.clusters.iter().map(|c| c.size).sum::<usize>(), 200);
}

#[test]
fn leaf_decomposition_matches_the_mip_with_a_trust_region() {
    let (mut p, data) = leaf_depth_instance(400, 8).unwrap();
    let tree = train_cart(
        &data,
        "risk",
        &CartParams {
            max_depth: 5,
            min_leaf: 5,
            ..CartParams::default()
        },
    )
    .unwrap();
    p.learned[0].model.shape = ModelShape::Tree(tree);
    p.trust_region = TrustRegionSpec::single(data.x.clone(), HullScope::XOnly);
    let leaves = solve_tree_by_leaves(&p, 1).unwrap();
    let mip = solve(&p, &MipOptions::default()).unwrap();
    assert!((leaves.best.objective - mip.objective).abs() <= 1e-6);
}

#[test]
fn exported_lp_file_reproduces_the_objective() {
    let (p, _) = multi_constraint_instance(150, 2).unwrap();
    let asm = assemble(&p).unwrap();
    let direct = solve_mip(&asm.model, &MipOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.lp");
    export_lp_file(&asm.model, &path).unwrap();
    let reread = solve_mip(&read_lp_file(&path).unwrap(), &MipOptions::default()).unwrap();
    assert!((direct.objective - reread.objective).abs() <= 1e-6 * (1.0 + direct.objective.abs()));
}
