mod support;

use conlearn_mio::{solve_lp, LpStatus, MioModel, Sense, PRIMAL_TOL};
use proptest::prelude::*;

/// Checks primal feasibility, dual sign conditions, complementary slackness,
/// and equality of primal and dual objectives.
fn check_optimality(m: &MioModel) {
    let s = solve_lp(m).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    let x = &s.primal;
    assert!(m.max_violation(x) <= PRIMAL_TOL, "primal residual {}", m.max_violation(x));
    let n = m.num_vars();
    let mut d: Vec<f64> = vec![0.0; n];
    for &(v, c) in &m.objective().terms {
        d[v.0] += c;
    }
    let mut dual_obj = m.objective().constant;
    for (i, row) in m.constraints().iter().enumerate() {
        let pi = s.duals[i];
        match row.sense {
            Sense::Le => assert!(pi <= 1e-7, "row {i} dual {pi}"),
            Sense::Ge => assert!(pi >= -1e-7, "row {i} dual {pi}"),
            Sense::Eq => {}
        }
        let slack = row.activity(x) - row.rhs;
        assert!((pi * slack).abs() <= 1e-6, "row {i}: dual {pi} slack {slack}");
        dual_obj += pi * row.rhs;
        for &(v, a) in &row.coefficients {
            d[v.0] -= pi * a;
        }
    }
    for (j, var) in m.variables().iter().enumerate() {
        assert!((d[j] - s.reduced_costs[j]).abs() <= 1e-6);
        if d[j] > 1e-7 {
            assert!(var.lower.is_finite() && (x[j] - var.lower).abs() <= 1e-6, "var {j}");
            dual_obj += d[j] * var.lower;
        } else if d[j] < -1e-7 {
            assert!(var.upper.is_finite() && (x[j] - var.upper).abs() <= 1e-6, "var {j}");
            dual_obj += d[j] * var.upper;
        } else if var.lower.is_finite() && (x[j] - var.lower).abs() <= 1e-9 {
            dual_obj += d[j] * var.lower;
        } else if var.upper.is_finite() {
            dual_obj += d[j] * var.upper.min(x[j]);
        } else {
            dual_obj += d[j] * x[j];
        }
    }
    assert!(
        (dual_obj - s.objective).abs() <= 1e-6 * (1.0 + s.objective.abs()),
        "primal {} dual {}",
        s.objective,
        dual_obj
    );
}

#[test]
fn random_feasible_lps_satisfy_strong_duality() {
    let mut checked = 0;
    for seed in 0..300 {
        let m = support::random_lp(seed);
        if solve_lp(&m).unwrap().status == LpStatus::Unbounded {
            continue;
        }
        check_optimality(&m);
        checked += 1;
    }
    assert!(checked > 200);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn duality_holds_for_generated_lps(seed in any::<u64>()) {
        let m = support::random_lp(seed);
        let s = solve_lp(&m).unwrap();
        prop_assume!(s.status == LpStatus::Optimal);
        check_optimality(&m);
    }
}

#[test]
fn degenerate_lp_terminates() {
    // Many redundant rows through the same vertex.
    let mut m = MioModel::new();
    let x: Vec<_> = (0..4).map(|i| m.add_continuous(0.0, f64::INFINITY, format!("x{i}"))).collect();
    for k in 0..12 {
        let coeffs: Vec<_> = x.iter().enumerate().map(|(i, &v)| (v, 1.0 + ((i * k) % 5) as f64)).collect();
        m.add_constraint(coeffs, Sense::Le, 0.0, format!("d{k}"));
    }
    m.add_constraint(x.iter().map(|&v| (v, 1.0)), Sense::Le, 1.0, "cap");
    m.set_objective(x.iter().map(|&v| (v, -1.0)), 0.0);
    let s = solve_lp(&m).unwrap();
    assert_eq!(s.status, LpStatus::Optimal);
    assert!(s.objective.abs() < 1e-9);
}
