use pdmsym::diffop::{multi_of, recognize_generators};
use pdmsym::killing::check_killing_identity;
use pdmsym::{expand_generators, inversion_conjugate, parse_expr, parse_operator, zero_certificate, DiffOp, Expr, Hamiltonian, Policy};

fn op(s: &str) -> DiffOp {
    expand_generators(&parse_operator(s).unwrap()).unwrap()
}

fn e(s: &str) -> Expr {
    parse_expr(s).unwrap()
}

fn is_zero(d: &DiffOp) -> bool {
    d.simplified().zero_certificate(&Policy::default()).unwrap().is_zero()
}

#[test]
fn dilation_bracket() {
    let c = op("D").commutator(&op("P3")).unwrap().simplified();
    assert!(is_zero(&c.sub(&DiffOp::partial(3))));
    assert_eq!(recognize_generators(&c, &Policy::default()).map(|g| pdmsym::lang::serialize_operator(&g)).as_deref(), Some("i*P3"));
}

#[test]
fn separable_mass_commutes() {
    // f and V independent of x3 apart from the 1/x3^2 term that P3^2 + 1/x3^2 absorbs
    let h = Hamiltonian::new(e("rt^2"), e("rt^2/x3^2"));
    let q = op("P3^2 + 1/x3^2");
    assert!(is_zero(&h.to_diffop().commutator(&q).unwrap()));
    let q = op("P3^2 + 2/x3^2");
    assert!(!is_zero(&h.to_diffop().commutator(&q).unwrap()));
}

#[test]
fn hamiltonian_coefficients() {
    // -d_a x3^2 d_a = -x3^2 lap - 2 x3 d_3
    let h = Hamiltonian::new(e("x3^2"), Expr::zero()).to_diffop();
    let policy = Policy::default();
    for a in 1..=3 {
        let c = &h.coeff(&multi_of(&[a, a])) + &e("x3^2");
        assert!(zero_certificate(&c, &policy).unwrap().is_zero());
    }
    let c = &h.coeff(&multi_of(&[3])) + &e("2*x3");
    assert!(zero_certificate(&c, &policy).unwrap().is_zero());
}

#[test]
fn inversion_of_translation() {
    // (U P1 U) 1 = 3 i x1 = K1 1
    let k = inversion_conjugate(&op("P1")).unwrap();
    let v = k.apply(&Expr::one());
    assert!(zero_certificate(&(&v - &e("3*i*x1")), &Policy::default()).unwrap().is_zero());
    assert!(is_zero(&k.sub(&op("K1"))));
    assert!(is_zero(&inversion_conjugate(&op("D")).unwrap().add(&op("D"))));
    assert!(is_zero(&inversion_conjugate(&op("L2")).unwrap().sub(&op("L2"))));
}

#[test]
fn quadratic_tensor_is_killing() {
    let x = Expr::coord;
    let mu: [[Expr; 3]; 3] = std::array::from_fn(|a| std::array::from_fn(|b| &x(a + 1) * &x(b + 1)));
    assert!(check_killing_identity(&mu, &Policy::default()).unwrap().is_zero());
    let mut bad = mu.clone();
    bad[0][0] = e("x1^3");
    assert!(!check_killing_identity(&bad, &Policy::default()).unwrap().is_zero());
}
