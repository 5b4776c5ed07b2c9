use pdmsym::solve::{find_integrals, span_contains, FindOptions};
use pdmsym::{expand_generators, parse_expr, parse_operator, DiffOp, Hamiltonian, Policy};

fn op(s: &str) -> DiffOp {
    expand_generators(&parse_operator(s).unwrap()).unwrap()
}

#[test]
fn axial_potential_on_sphere_mass() {
    let h = Hamiltonian::new(parse_expr("r^2").unwrap(), parse_expr("c*r^2/x3^2").unwrap());
    let found = find_integrals(&h.f, &h.v, &[2], &FindOptions::default()).unwrap();
    let policy = Policy::default();
    for q in &found {
        let o = q.operator().unwrap();
        assert!(h.to_diffop().commutator(&o).unwrap().zero_certificate(&policy).unwrap().is_zero());
    }
    assert!(span_contains(&found, &h, &op("L3^2"), &policy));
    assert!(span_contains(&found, &h, &op("{L1,L2} - 2*c*x1*x2/x3^2"), &policy));
    assert!(!span_contains(&found, &h, &op("{L1,L2} + 4*c*x1*x2/x3^2"), &policy));
}

#[test]
fn free_flat_translations() {
    // f = 1, V = 0: every constant symmetric mu is an integral
    let h = Hamiltonian::new(parse_expr("1").unwrap(), parse_expr("0").unwrap());
    let found = find_integrals(&h.f, &h.v, &[0], &FindOptions::default()).unwrap();
    let policy = Policy::default();
    for s in ["P1^2", "{P1,P2}", "P3^2", "{P2,P3}"] {
        assert!(span_contains(&found, &h, &op(s), &policy), "{s}");
    }
}
