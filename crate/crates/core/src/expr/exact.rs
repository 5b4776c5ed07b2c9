//! Exact evaluation at rational points where `r` and `rt` are also rational.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rug::{Integer, Rational};
use thiserror::Error;

use super::{Expr, Geom, Node, Point};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ExactEvalError {
    #[error("unbound parameter `{0}`")]
    UnboundParam(String),
    #[error("`{0}` has no exact value at this point")]
    NotRational(String),
    #[error("division by zero")]
    DivisionByZero,
}

/// A rational point with rational `r` and `rt`.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalPoint {
    pub x: [Rational; 3],
    pub r: Rational,
    pub rt: Rational,
}

impl RationalPoint {
    /// Checks that `r` and `rt` are the exact norms of `x`.
    pub fn new(x: [Rational; 3], r: Rational, rt: Rational) -> Option<RationalPoint> {
        let rt2 = Rational::from(&x[0] * &x[0]) + Rational::from(&x[1] * &x[1]);
        let r2 = rt2.clone() + Rational::from(&x[2] * &x[2]);
        let ok = r > 0 && rt > 0 && Rational::from(&rt * &rt) == rt2 && Rational::from(&r * &r) == r2;
        ok.then_some(RationalPoint { x, r, rt })
    }

    /// Draw a point in `[1/2, 2]^3` from rational angle parameters.
    ///
    /// `x1 = rt (1-u^2)/(1+u^2)`, `x2 = rt 2u/(1+u^2)`, `rt = r 2v/(1+v^2)`,
    /// `x3 = r (1-v^2)/(1+v^2)`, with `r` chosen so the point lands in the box.
    pub fn random<R: Rng>(rng: &mut R) -> RationalPoint {
        loop {
            let u = Rational::from((rng.gen_range(1..64i64), 64));
            let v = Rational::from((rng.gen_range(1..64i64), 64));
            let one = Rational::from(1);
            let u2 = Rational::from(&u * &u);
            let v2 = Rational::from(&v * &v);
            let cphi = Rational::from(&one - &u2) / Rational::from(&one + &u2);
            let sphi = Rational::from(2 * &u) / Rational::from(&one + &u2);
            let stheta = Rational::from(2 * &v) / Rational::from(&one + &v2);
            let ctheta = Rational::from(&one - &v2) / Rational::from(&one + &v2);
            let dir = [
                Rational::from(&stheta * &cphi),
                Rational::from(&stheta * &sphi),
                ctheta.clone(),
            ];
            let lo = dir.iter().min().unwrap().clone();
            let hi = dir.iter().max().unwrap().clone();
            // need r*lo >= 1/2 and r*hi <= 2
            if Rational::from(&hi / &lo) > 4 {
                continue;
            }
            let rmin = Rational::from((1, 2)) / &lo;
            let rmax = Rational::from(2) / &hi;
            let t = Rational::from((rng.gen_range(0..=32i64), 32));
            let r = rmin.clone() + (rmax - rmin) * t;
            let x = dir.map(|d| Rational::from(&d * &r));
            let rt = Rational::from(&stheta * &r);
            return RationalPoint::new(x, r, rt).expect("parametrisation is exact");
        }
    }

    pub fn to_point(&self, precision: u32) -> Point {
        Point {
            coords: self.x.clone(),
            precision,
        }
    }
}

impl Expr {
    /// Exact value at `p`. Fails on `phi`, `theta` and transcendental functions
    /// of non-trivial arguments.
    pub fn eval_exact(
        &self,
        p: &RationalPoint,
        bindings: &BTreeMap<String, Scalar>,
    ) -> Result<Scalar, ExactEvalError> {
        let mut memo = HashMap::new();
        exact_memo(self, p, bindings, &mut memo)
    }
}

fn exact_memo(
    e: &Expr,
    p: &RationalPoint,
    bindings: &BTreeMap<String, Scalar>,
    memo: &mut HashMap<usize, Scalar>,
) -> Result<Scalar, ExactEvalError> {
    if let Some(v) = memo.get(&e.id()) {
        return Ok(v.clone());
    }
    let v = match e.node() {
        Node::Const(c) => c.clone(),
        Node::Coord(a) => Scalar::from(p.x[*a as usize - 1].clone()),
        Node::Geom(Geom::R) => Scalar::from(p.r.clone()),
        Node::Geom(Geom::Rt) => Scalar::from(p.rt.clone()),
        Node::Geom(g) => return Err(ExactEvalError::NotRational(g.name().into())),
        Node::Param(name) => bindings
            .get(&**name)
            .cloned()
            .ok_or_else(|| ExactEvalError::UnboundParam(name.to_string()))?,
        Node::Sum(v) => {
            let mut acc = Scalar::zero();
            for t in v {
                acc += &exact_memo(t, p, bindings, memo)?;
            }
            acc
        }
        Node::Product(v) => {
            let mut acc = Scalar::one();
            for t in v {
                acc *= &exact_memo(t, p, bindings, memo)?;
                if acc.is_zero() {
                    break;
                }
            }
            acc
        }
        Node::Pow(b, n) => exact_memo(b, p, bindings, memo)?
            .pow(*n)
            .ok_or(ExactEvalError::DivisionByZero)?,
        Node::Apply(f, a) => {
            let arg = exact_memo(a, p, bindings, memo)?;
            exact_apply(*f, &arg).ok_or_else(|| ExactEvalError::NotRational(e.to_string()))?
        }
    };
    memo.insert(e.id(), v.clone());
    Ok(v)
}

fn exact_apply(f: super::Func, arg: &Scalar) -> Option<Scalar> {
    use super::Func;
    match f {
        Func::Sin if arg.is_zero() => Some(Scalar::zero()),
        Func::Cos | Func::Exp if arg.is_zero() => Some(Scalar::one()),
        Func::Ln if arg.is_one() => Some(Scalar::zero()),
        Func::Sqrt if arg.is_real() && arg.re >= 0 => {
            let (n, d) = (arg.re.numer(), arg.re.denom());
            let (sn, rn) = n.clone().sqrt_rem(Integer::new());
            let (sd, rd) = d.clone().sqrt_rem(Integer::new());
            (rn == 0 && rd == 0).then(|| Scalar::from(Rational::from((sn, sd))))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_points_are_pythagorean_and_in_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let p = RationalPoint::random(&mut rng);
            assert!(RationalPoint::new(p.x.clone(), p.r.clone(), p.rt.clone()).is_some());
            for c in &p.x {
                assert!(*c >= Rational::from((1, 2)) && *c <= 2);
            }
        }
    }

    #[test]
    fn exact_value_with_odd_powers_of_r() {
        let p = RationalPoint::new(
            [Rational::from((1, 2)), Rational::from((2, 3)), Rational::from(2)],
            Rational::from((13, 6)),
            Rational::from((5, 6)),
        )
        .unwrap();
        let e = &Expr::coord(3) / &Expr::r() + Expr::rt();
        let v = e.eval_exact(&p, &BTreeMap::new()).unwrap();
        assert_eq!(v, Scalar::from(Rational::from((12, 13)) + Rational::from((5, 6))));
        assert!(Expr::phi().eval_exact(&p, &BTreeMap::new()).is_err());
    }
}
