//! Conjugation by the weighted inversion `(U psi)(x) = r^-3 psi(x / r^2)`.
//!
//! `U` is an involution. Multiplication operators pull back along the
//! inversion, and `U d_a U = (delta_ab r^2 - 2 x_a x_b) d_b - 3 x_a`.
//! With these conventions `P_a -> K_a`, `K_a -> P_a`, `L_a -> L_a` and
//! `D -> -D`.

use super::{multi_of, DiffOp, DiffOpError, Multi};
use crate::expr::Expr;
use crate::normal::simplify;

/// `U d_a U` for `a` in 1..=3.
pub fn inverted_derivative(a: usize) -> DiffOp {
    let x = |i: usize| Expr::coord(i);
    let mut terms = vec![([0, 0, 0], &Expr::int(-3) * &x(a))];
    for b in 1..=3 {
        let mut c = &Expr::int(-2) * &(&x(a) * &x(b));
        if a == b {
            c = &c + &Expr::r_squared();
        }
        terms.push((multi_of(&[b]), c));
    }
    DiffOp::from_terms(terms)
}

fn inverted_monomial(m: &Multi) -> Result<DiffOp, DiffOpError> {
    let mut acc = DiffOp::scalar(Expr::one());
    for (axis, &k) in m.iter().enumerate() {
        for _ in 0..k {
            acc = acc.compose(&inverted_derivative(axis + 1))?;
        }
    }
    Ok(acc)
}

pub fn inversion_conjugate(q: &DiffOp) -> Result<DiffOp, DiffOpError> {
    let k = q.order();
    if k > 2 {
        return Err(DiffOpError::OrderTooHigh(k));
    }
    let mut acc = DiffOp::zero();
    for (m, c) in q.terms() {
        let pulled = simplify(&c.invert());
        acc = acc.add(&DiffOp::scalar(pulled).compose(&inverted_monomial(m)?)?);
    }
    Ok(acc.simplified())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffop::Generator;

    fn same(a: &DiffOp, b: &DiffOp) -> bool {
        a.sub(b).simplified().is_zero()
    }

    #[test]
    fn generator_images() {
        for a in 1..=3u8 {
            let p = Generator::P(a).op();
            let k = Generator::K(a).op();
            let l = Generator::L(a).op();
            assert!(same(&inversion_conjugate(&p).unwrap(), &k));
            assert!(same(&inversion_conjugate(&k).unwrap(), &p));
            assert!(same(&inversion_conjugate(&l).unwrap(), &l));
        }
        let d = Generator::D.op();
        assert!(same(&inversion_conjugate(&d).unwrap(), &d.neg()));
    }

    #[test]
    fn involution_on_second_order() {
        let q = DiffOp::from_terms([
            ([1, 1, 0], Expr::coord(3)),
            ([0, 0, 2], Expr::r()),
            ([0, 1, 0], Expr::coord(1).recip()),
            ([0, 0, 0], Expr::sin(Expr::phi())),
        ]);
        let back = inversion_conjugate(&inversion_conjugate(&q).unwrap()).unwrap();
        assert!(same(&back, &q));
    }
}
