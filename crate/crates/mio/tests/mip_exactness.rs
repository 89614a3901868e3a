mod support;

use std::time::Instant;

use conlearn_mio::{solve_mip, MipError, MipOptions, MipStatus, INTEGRALITY_TOL, PRIMAL_TOL};

#[test]
fn random_mixed_binary_instances_match_enumeration() {
    let opts = MipOptions::default();
    let mut solve_time = 0.0;
    let mut feasible = 0;
    for seed in 0..200 {
        let inst = support::random_mixed(seed, 8, 6);
        let oracle = support::brute_force(&inst);
        let t = Instant::now();
        let got = solve_mip(&inst.model, &opts);
        solve_time += t.elapsed().as_secs_f64();
        match (oracle, got) {
            (None, Err(MipError::Infeasible)) => {}
            (Some(best), Ok(sol)) => {
                feasible += 1;
                assert_eq!(sol.status, MipStatus::Optimal);
                assert!((sol.objective - best).abs() <= 1e-6, "seed {seed}: {} vs {best}", sol.objective);
                assert!(inst.model.max_violation(&sol.primal) <= PRIMAL_TOL, "seed {seed}");
                for &j in &inst.binaries {
                    let v = sol.primal[j];
                    assert!(v.min(1.0 - v).abs() <= INTEGRALITY_TOL, "seed {seed}");
                }
            }
            (o, g) => panic!("seed {seed}: oracle {o:?}, solver {g:?}"),
        }
    }
    assert!(feasible > 100, "too few feasible instances: {feasible}");
    assert!(solve_time < 60.0);
}

#[test]
fn six_item_knapsack_matches_enumeration() {
    use conlearn_mio::{MioModel, Sense};
    let w = [4.0, 3.0, 5.0, 2.0, 6.0, 1.5];
    let v = [7.0, 5.0, 9.0, 3.5, 10.0, 2.0];
    let cap = 11.0;
    let mut m = MioModel::new();
    let x: Vec<_> = (0..6).map(|i| m.add_binary(format!("item{i}"))).collect();
    m.add_constraint(x.iter().zip(w).map(|(&xi, wi)| (xi, wi)), Sense::Le, cap, "cap");
    m.set_objective(x.iter().zip(v).map(|(&xi, vi)| (xi, -vi)), 0.0);
    let mut best = 0.0f64;
    for mask in 0..64u32 {
        let (mut wt, mut val) = (0.0, 0.0);
        for i in 0..6 {
            if mask >> i & 1 == 1 {
                wt += w[i];
                val += v[i];
            }
        }
        if wt <= cap {
            best = best.max(val);
        }
    }
    let s = solve_mip(&m, &MipOptions::default()).unwrap();
    assert!((s.objective + best).abs() < 1e-9);
}

#[test]
fn repeated_solves_are_bit_identical() {
    for seed in [3u64, 17, 99] {
        let inst = support::random_mixed(seed, 8, 6);
        let a = solve_mip(&inst.model, &MipOptions::default());
        let b = solve_mip(&inst.model, &MipOptions::default());
        match (a, b) {
            (Ok(a), Ok(b)) => {
                assert_eq!(a.nodes, b.nodes);
                assert_eq!(a.objective.to_bits(), b.objective.to_bits());
                let ba: Vec<u64> = a.primal.iter().map(|v| v.to_bits()).collect();
                let bb: Vec<u64> = b.primal.iter().map(|v| v.to_bits()).collect();
                assert_eq!(ba, bb);
            }
            (Err(MipError::Infeasible), Err(MipError::Infeasible)) => {}
            other => panic!("mismatch {other:?}"),
        }
    }
}
