mod support;

use conlearn_mio::{export_lp_file, parse_lp_str, read_lp_file, write_lp_string, LpFileError, MioModel, Sense};
use proptest::prelude::*;

fn same_model(a: &MioModel, b: &MioModel) {
    assert_eq!(a.variables(), b.variables());
    assert_eq!(a.objective(), b.objective());
    assert_eq!(a.num_constraints(), b.num_constraints());
    for (ra, rb) in a.constraints().iter().zip(b.constraints()) {
        assert_eq!(ra, rb);
    }
}

#[test]
fn file_round_trip_preserves_model() {
    let inst = support::random_mixed(7, 8, 6);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.lp");
    export_lp_file(&inst.model, &path).unwrap();
    let back = read_lp_file(&path).unwrap();
    same_model(&inst.model, &back);
}

#[test]
fn every_variable_has_one_bounds_line() {
    let inst = support::random_mixed(11, 8, 6);
    let text = write_lp_string(&inst.model);
    let bounds: Vec<&str> = text
        .lines()
        .skip_while(|l| *l != "Bounds")
        .skip(1)
        .take_while(|l| *l != "Binary" && *l != "End")
        .collect();
    assert_eq!(bounds.len(), inst.model.num_vars());
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(read_lp_file("/nonexistent/model.lp"), Err(LpFileError::Io(_))));
}

#[test]
fn rejects_maximize_and_generals() {
    assert!(matches!(parse_lp_str("Maximize\n obj: x\nEnd\n"), Err(LpFileError::Parse { line: 1, .. })));
    let t = "Minimize\n obj: x\nSubject To\n c: x >= 1\nGeneral\n x\nEnd\n";
    assert!(matches!(parse_lp_str(t), Err(LpFileError::Parse { line: 5, .. })));
}

#[test]
fn bad_sense_on_wrapped_row_reports_its_line() {
    let t = "Minimize\n obj: x + y\nSubject To\n c1: x + y >= 1\n c2: x\n  + y\n  =! 3\nEnd\n";
    match parse_lp_str(t) {
        Err(LpFileError::Parse { line, .. }) => assert_eq!(line, 7),
        other => panic!("{other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn text_round_trip_is_exact(
        coefs in proptest::collection::vec(-1e6f64..1e6, 1..12),
        rhs in -1e3f64..1e3,
        lo in -50.0f64..0.0,
        span in 0.0f64..100.0,
        seed in any::<u64>(),
    ) {
        let mut m = MioModel::new();
        let vars: Vec<_> = coefs.iter().enumerate().map(|(i, _)| {
            if i % 3 == 0 { m.add_binary(format!("b{i}")) } else { m.add_continuous(lo, lo + span, format!("y[{i}]")) }
        }).collect();
        m.add_constraint(vars.iter().zip(&coefs).map(|(&v, &c)| (v, c)), Sense::Le, rhs, "row_a");
        m.add_constraint(vars.iter().zip(&coefs).map(|(&v, &c)| (v, c * 0.5)), Sense::Eq, -rhs, "row_b");
        m.set_objective(vars.iter().zip(&coefs).map(|(&v, &c)| (v, -c)), seed as f64 / 7.0);
        let text = write_lp_string(&m);
        let back = parse_lp_str(&text).unwrap();
        same_model(&m, &back);
        prop_assert_eq!(write_lp_string(&back), text);
    }
}
