use std::collections::HashMap;

use super::{Expr, Func, Geom, Node};
use crate::scalar::Scalar;

impl Expr {
    /// Partial derivative with respect to `x_axis` (axis in 1..=3).
    pub fn diff(&self, axis: usize) -> Expr {
        assert!((1..=3).contains(&axis), "axis out of range: {axis}");
        let mut memo = HashMap::new();
        diff_memo(self, axis as u8, &mut memo)
    }

    /// Mixed partial derivative, applied in the order given.
    pub fn diff_many(&self, axes: &[usize]) -> Expr {
        axes.iter().fold(self.clone(), |e, &a| e.diff(a))
    }

    pub fn gradient(&self) -> [Expr; 3] {
        [self.diff(1), self.diff(2), self.diff(3)]
    }
}

fn x(a: usize) -> Expr {
    Expr::coord(a)
}

/// Derivatives of the geometric atoms.
fn geom_derivative(g: Geom, axis: u8) -> Expr {
    let a = axis as usize;
    match g {
        Geom::R => &x(a) / &Expr::r(),
        Geom::Rt => {
            if a == 3 {
                Expr::zero()
            } else {
                &x(a) / &Expr::rt()
            }
        }
        Geom::Phi => match a {
            1 => -(&x(2) / &Expr::pow(&Expr::rt(), 2)),
            2 => &x(1) / &Expr::pow(&Expr::rt(), 2),
            _ => Expr::zero(),
        },
        Geom::Theta => {
            let r2 = Expr::pow(&Expr::r(), -2);
            match a {
                3 => -(&Expr::rt() * &r2),
                _ => Expr::product([x(a), x(3), r2, Expr::pow(&Expr::rt(), -1)]),
            }
        }
    }
}

fn diff_memo(e: &Expr, axis: u8, memo: &mut HashMap<usize, Expr>) -> Expr {
    if let Some(d) = memo.get(&e.id()) {
        return d.clone();
    }
    let d = match e.node() {
        Node::Const(_) | Node::Param(_) => Expr::zero(),
        Node::Coord(a) => {
            if *a == axis {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Geom(g) => geom_derivative(*g, axis),
        Node::Sum(v) => Expr::sum(v.iter().map(|t| diff_memo(t, axis, memo))),
        Node::Product(v) => {
            let mut terms = Vec::with_capacity(v.len());
            for (i, f) in v.iter().enumerate() {
                let df = diff_memo(f, axis, memo);
                if df.is_zero() {
                    continue;
                }
                let mut factors: Vec<Expr> = Vec::with_capacity(v.len());
                factors.extend(v[..i].iter().cloned());
                factors.push(df);
                factors.extend(v[i + 1..].iter().cloned());
                terms.push(Expr::product(factors));
            }
            Expr::sum(terms)
        }
        Node::Pow(b, n) => {
            let db = diff_memo(b, axis, memo);
            if db.is_zero() {
                Expr::zero()
            } else {
                Expr::product([Expr::int(*n), Expr::pow(b, n - 1), db])
            }
        }
        Node::Apply(func, arg) => {
            let da = diff_memo(arg, axis, memo);
            if da.is_zero() {
                Expr::zero()
            } else {
                let outer = match func {
                    Func::Sin => Expr::cos(arg.clone()),
                    Func::Cos => -Expr::sin(arg.clone()),
                    Func::Exp => e.clone(),
                    Func::Ln => arg.recip(),
                    Func::Sqrt => e.recip().scale(&Scalar::ratio(1, 2)),
                };
                &outer * &da
            }
        }
    };
    memo.insert(e.id(), d.clone());
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_and_atom_rules() {
        assert_eq!(Expr::r().diff(1), &x(1) / &Expr::r());
        assert!(Expr::phi().diff(3).is_zero());
        assert!(Expr::rt().diff(3).is_zero());
        assert!(Expr::param("c").diff(2).is_zero());
    }

    #[test]
    fn power_rule_on_geometric_square() {
        // d/dx1 (r^2) = 2 x1, exactly, because r^2 is rewritten first
        let e = Expr::pow(&Expr::r(), 2).diff(1);
        assert_eq!(e, &Expr::int(2) * &x(1));
    }
}
