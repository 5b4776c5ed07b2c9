use pdmsym::catalog::{
    binding_suite, builtin_catalog, find_row, instantiate, parse_catalog, perturbation_check, verify_row, Binding, Verdict,
    CATALOG_JSON, CATALOG_SHA256,
};
use pdmsym::{parse_expr, Expr, Policy, Scalar};

#[test]
fn all_rows_present() {
    let rows = builtin_catalog();
    assert_eq!(rows.len(), 28);
    assert_eq!(rows.iter().filter(|r| r.table == 1).count(), 11);
    assert!(rows.iter().filter(|r| r.is_skipped()).map(|r| r.id()).eq(["T1.11".to_string()]));
    assert!(parse_catalog(CATALOG_JSON, Some(CATALOG_SHA256)).is_ok());
    assert!(parse_catalog(&CATALOG_JSON.replace("x3^2", "x3^3"), Some(CATALOG_SHA256)).is_err());
}

#[test]
fn first_order_rows_verify() {
    let rows = builtin_catalog();
    let policy = Policy::default();
    for item in 14..=17 {
        let row = find_row(&rows, 2, item).unwrap();
        for b in binding_suite(row, policy.seed) {
            let rep = verify_row(row, &b, &policy);
            assert!(rep.all_verified(), "T2.{item}: {rep:?}");
        }
    }
}

#[test]
fn doubled_potential_is_discrepant() {
    let rows = builtin_catalog();
    let mut row = find_row(&rows, 2, 14).unwrap().clone();
    row.v = format!("2*({})", row.v);
    let rep = verify_row(&row, &Binding::default(), &Policy::default());
    match &rep.integrals[0].verdict {
        Verdict::Discrepant { symbolic, numeric, .. } => {
            assert_eq!(*symbolic, Some(true));
            assert!(!numeric.is_zero());
        }
        v => panic!("{v:?}"),
    }
    assert!(rep.integrals[2].verdict.is_verified());
}

#[test]
fn item_one_with_halved_scalar() {
    let rows = builtin_catalog();
    let row = find_row(&rows, 1, 1).unwrap();
    let b = Binding {
        slots: [("F".to_string(), Expr::one()), ("G".to_string(), parse_expr("cos(theta)^2").unwrap())].into(),
        params: Default::default(),
    };
    let inst = instantiate(row, &b).unwrap();
    let h = inst.hamiltonian.to_diffop();
    let policy = Policy::default();
    assert!(!h.commutator(&inst.operators[0]).unwrap().zero_certificate(&policy).unwrap().is_zero());
    let fixed = pdmsym::expand_generators(&pdmsym::parse_operator("{P3,K3} + 2*cos(theta)^2").unwrap()).unwrap();
    assert!(h.commutator(&fixed).unwrap().zero_certificate(&policy).unwrap().is_zero());
}

#[test]
fn illegal_slot_rejected() {
    let rows = builtin_catalog();
    let row = find_row(&rows, 1, 1).unwrap();
    let b = Binding {
        slots: [("F".to_string(), Expr::coord(3)), ("G".to_string(), Expr::one())].into(),
        params: Default::default(),
    };
    assert!(instantiate(row, &b).is_err());
}

#[test]
fn perturbed_negatives_fail_both_ways() {
    let rows = builtin_catalog();
    let row = find_row(&rows, 2, 8).unwrap();
    let b = Binding {
        slots: Default::default(),
        params: [("c".to_string(), Scalar::ratio(3, 7))].into(),
    };
    for n in 0..4 {
        let o = perturbation_check(row, &b, n, &Policy::default()).unwrap();
        assert!(!o.commutator_zero && !o.residuals_zero, "{o:?}");
    }
}
