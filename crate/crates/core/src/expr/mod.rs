//! Immutable symbolic scalar fields over Gaussian-rational constants.
//!
//! Expressions are reference-counted trees with a cached structural hash. All
//! construction goes through the smart constructors ([`Expr::sum`],
//! [`Expr::product`], [`Expr::pow`], [`Expr::apply`]) which keep a light
//! canonical form:
//!
//! * sums and products are flattened and sorted,
//! * like terms in a sum and like bases in a product are merged,
//! * constants are folded,
//! * even powers of `r` and `rt` are rewritten as polynomials in the
//!   coordinates (`r^2 = x1^2+x2^2+x3^2`, `rt^2 = x1^2+x2^2`).
//!
//! Full cancellation is the job of [`crate::normal`].

mod diff;
mod eval;
mod exact;
mod subst;

pub use eval::{digits_to_bits, CFloat, EvalError, Point};
pub use exact::{ExactEvalError, RationalPoint};

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use crate::scalar::Scalar;

/// Geometric atoms with hard-coded gradients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Geom {
    /// `sqrt(x1^2+x2^2+x3^2)`
    R,
    /// `sqrt(x1^2+x2^2)`
    Rt,
    /// azimuth `atan(x2/x1)`
    Phi,
    /// polar angle, `cos(theta) = x3/r`
    Theta,
}

impl Geom {
    pub fn name(self) -> &'static str {
        match self {
            Geom::R => "r",
            Geom::Rt => "rt",
            Geom::Phi => "phi",
            Geom::Theta => "theta",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Const(Scalar),
    /// Cartesian coordinate, axis 1..=3.
    Coord(u8),
    Geom(Geom),
    Param(Arc<str>),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Pow(Expr, i64),
    Apply(Func, Expr),
}

impl Node {
    fn rank(&self) -> u8 {
        match self {
            Node::Const(_) => 0,
            Node::Coord(_) => 1,
            Node::Geom(_) => 2,
            Node::Param(_) => 3,
            Node::Pow(..) => 4,
            Node::Apply(..) => 5,
            Node::Product(_) => 6,
            Node::Sum(_) => 7,
        }
    }
}

struct Inner {
    node: Node,
    hash: u64,
}

/// A shared, immutable expression node.
#[derive(Clone)]
pub struct Expr(Arc<Inner>);

impl Expr {
    fn from_node(node: Node) -> Expr {
        let mut h = DefaultHasher::new();
        node.hash(&mut h);
        Expr(Arc::new(Inner {
            hash: h.finish(),
            node,
        }))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    /// Stable address usable as a memoisation key while `self` is alive.
    pub(crate) fn id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn structural_hash(&self) -> u64 {
        self.0.hash
    }

    // ---- leaves -------------------------------------------------------

    pub fn constant(c: Scalar) -> Expr {
        Expr::from_node(Node::Const(c))
    }

    pub fn int(v: i64) -> Expr {
        Expr::constant(Scalar::from(v))
    }

    pub fn ratio(n: i64, d: i64) -> Expr {
        Expr::constant(Scalar::ratio(n, d))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn i() -> Expr {
        Expr::constant(Scalar::i())
    }

    /// Coordinate `x_axis`, axis in 1..=3.
    pub fn coord(axis: usize) -> Expr {
        assert!((1..=3).contains(&axis), "axis out of range: {axis}");
        Expr::from_node(Node::Coord(axis as u8))
    }

    pub fn geom(g: Geom) -> Expr {
        Expr::from_node(Node::Geom(g))
    }

    pub fn r() -> Expr {
        Expr::geom(Geom::R)
    }

    pub fn rt() -> Expr {
        Expr::geom(Geom::Rt)
    }

    pub fn phi() -> Expr {
        Expr::geom(Geom::Phi)
    }

    pub fn theta() -> Expr {
        Expr::geom(Geom::Theta)
    }

    pub fn param(name: &str) -> Expr {
        Expr::from_node(Node::Param(Arc::from(name)))
    }

    /// `x1^2+x2^2+x3^2`
    pub fn r_squared() -> Expr {
        Expr::sum((1..=3).map(|a| Expr::pow(&Expr::coord(a), 2)))
    }

    /// `x1^2+x2^2`
    pub fn rt_squared() -> Expr {
        Expr::sum((1..=2).map(|a| Expr::pow(&Expr::coord(a), 2)))
    }

    // ---- queries ------------------------------------------------------

    pub fn as_const(&self) -> Option<&Scalar> {
        match self.node() {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(Scalar::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.as_const().is_some_and(Scalar::is_one)
    }

    /// No geometric atoms and no elementary functions.
    pub fn is_rational(&self) -> bool {
        match self.node() {
            Node::Const(_) | Node::Coord(_) | Node::Param(_) => true,
            Node::Geom(_) | Node::Apply(..) => false,
            Node::Sum(v) | Node::Product(v) => v.iter().all(Expr::is_rational),
            Node::Pow(b, _) => b.is_rational(),
        }
    }

    pub fn params(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Node::Param(p) = e.node() {
                out.insert(p.to_string());
            }
        });
        out
    }

    pub fn contains_coord(&self) -> bool {
        self.any(&|e| matches!(e.node(), Node::Coord(_)))
    }

    pub fn contains_geom(&self, g: Geom) -> bool {
        self.any(&|e| matches!(e.node(), Node::Geom(h) if *h == g))
    }

    pub fn contains_param(&self, name: &str) -> bool {
        self.any(&|e| matches!(e.node(), Node::Param(p) if &**p == name))
    }

    /// Pre-order traversal (shared subtrees are visited once per occurrence).
    pub fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self.node() {
            Node::Sum(v) | Node::Product(v) => v.iter().for_each(|c| c.visit(f)),
            Node::Pow(b, _) | Node::Apply(_, b) => b.visit(f),
            _ => {}
        }
    }

    pub fn any(&self, pred: &dyn Fn(&Expr) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        match self.node() {
            Node::Sum(v) | Node::Product(v) => v.iter().any(|c| c.any(pred)),
            Node::Pow(b, _) | Node::Apply(_, b) => b.any(pred),
            _ => false,
        }
    }

    /// Number of nodes counted as a tree.
    pub fn size(&self) -> usize {
        1 + match self.node() {
            Node::Sum(v) | Node::Product(v) => v.iter().map(Expr::size).sum(),
            Node::Pow(b, _) | Node::Apply(_, b) => b.size(),
            _ => 0,
        }
    }

    // ---- smart constructors -------------------------------------------

    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        let mut constant = Scalar::zero();
        let mut like: BTreeMap<Expr, Scalar> = BTreeMap::new();
        let mut stack: Vec<Expr> = terms.into_iter().collect();
        stack.reverse();
        while let Some(t) = stack.pop() {
            match t.node() {
                Node::Const(c) => constant += c,
                Node::Sum(v) => stack.extend(v.iter().rev().cloned()),
                _ => {
                    let (c, rest) = t.split_coefficient();
                    if let Node::Sum(v) = rest.node() {
                        stack.extend(v.iter().rev().map(|u| u.scale(&c)));
                        continue;
                    }
                    let slot = like.entry(rest).or_insert_with(Scalar::zero);
                    *slot += &c;
                }
            }
        }
        let mut out: Vec<Expr> = Vec::with_capacity(like.len() + 1);
        for (rest, c) in like {
            if c.is_zero() {
                continue;
            }
            out.push(Expr::scaled(c, rest));
        }
        if !constant.is_zero() {
            out.push(Expr::constant(constant));
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => {
                out.sort();
                Expr::from_node(Node::Sum(out))
            }
        }
    }

    /// `c * rest` where `rest` carries no constant factor.
    fn scaled(c: Scalar, rest: Expr) -> Expr {
        if c.is_one() {
            return rest;
        }
        let mut factors = vec![Expr::constant(c)];
        match rest.node() {
            Node::Product(v) => factors.extend(v.iter().cloned()),
            _ => factors.push(rest),
        }
        Expr::from_node(Node::Product(factors))
    }

    /// Split into numeric coefficient and the remaining non-constant part.
    pub fn split_coefficient(&self) -> (Scalar, Expr) {
        match self.node() {
            Node::Const(c) => (c.clone(), Expr::one()),
            Node::Product(v) => match v[0].node() {
                Node::Const(c) => {
                    let rest: Vec<Expr> = v[1..].to_vec();
                    let rest = if rest.len() == 1 {
                        rest.into_iter().next().unwrap()
                    } else {
                        Expr::from_node(Node::Product(rest))
                    };
                    (c.clone(), rest)
                }
                _ => (Scalar::one(), self.clone()),
            },
            _ => (Scalar::one(), self.clone()),
        }
    }

    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        Expr::product_inner(factors.into_iter().collect(), 0)
    }

    fn product_inner(factors: Vec<Expr>, depth: u32) -> Expr {
        let mut constant = Scalar::one();
        let mut bases: BTreeMap<Expr, i64> = BTreeMap::new();
        let mut stack = factors;
        stack.reverse();
        while let Some(f) = stack.pop() {
            match f.node() {
                Node::Const(c) => {
                    if c.is_zero() {
                        return Expr::zero();
                    }
                    constant *= c;
                }
                Node::Product(v) => stack.extend(v.iter().rev().cloned()),
                Node::Pow(b, n) => *bases.entry(b.clone()).or_insert(0) += n,
                _ => *bases.entry(f.clone()).or_insert(0) += 1,
            }
        }
        let mut out: Vec<Expr> = Vec::with_capacity(bases.len());
        let mut needs_pass = false;
        for (b, n) in bases {
            if n == 0 {
                continue;
            }
            let p = Expr::pow(&b, n);
            if n.abs() >= 2 && matches!(b.node(), Node::Geom(Geom::R | Geom::Rt)) {
                needs_pass = true;
            }
            match p.node() {
                Node::Const(c) => {
                    constant *= c;
                }
                Node::Product(_) => {
                    needs_pass = true;
                    out.push(p);
                }
                _ => out.push(p),
            }
        }
        if constant.is_zero() {
            return Expr::zero();
        }
        if needs_pass && depth < 4 {
            out.push(Expr::constant(constant));
            return Expr::product_inner(out, depth + 1);
        }
        out.sort();
        match (out.len(), constant.is_one()) {
            (0, _) => Expr::constant(constant),
            (1, true) => out.pop().unwrap(),
            _ => {
                if !constant.is_one() {
                    out.insert(0, Expr::constant(constant));
                }
                Expr::from_node(Node::Product(out))
            }
        }
    }

    pub fn pow(base: &Expr, n: i64) -> Expr {
        if n == 0 {
            return Expr::one();
        }
        if n == 1 {
            return base.clone();
        }
        match base.node() {
            Node::Const(c) => match c.pow(n) {
                Some(v) => Expr::constant(v),
                // 0^-n stays symbolic; evaluation reports the division by zero.
                None => Expr::from_node(Node::Pow(base.clone(), n)),
            },
            Node::Pow(b, m) => Expr::pow(b, m * n),
            Node::Product(v) => Expr::product(v.iter().map(|f| Expr::pow(f, n))),
            Node::Geom(g @ (Geom::R | Geom::Rt)) if n.abs() >= 2 => {
                let square = if *g == Geom::R {
                    Expr::r_squared()
                } else {
                    Expr::rt_squared()
                };
                let half = n.div_euclid(2);
                let odd = n.rem_euclid(2);
                let even_part = Expr::pow(&square, half);
                if odd == 0 {
                    even_part
                } else {
                    Expr::product([even_part, base.clone()])
                }
            }
            _ => Expr::from_node(Node::Pow(base.clone(), n)),
        }
    }

    pub fn apply(func: Func, arg: Expr) -> Expr {
        if let Some(c) = arg.as_const() {
            if c.is_zero() {
                match func {
                    Func::Sin | Func::Sqrt => return Expr::zero(),
                    Func::Cos | Func::Exp => return Expr::one(),
                    Func::Ln => {}
                }
            } else if c.is_one() {
                match func {
                    Func::Ln => return Expr::zero(),
                    Func::Sqrt => return Expr::one(),
                    _ => {}
                }
            }
        }
        Expr::from_node(Node::Apply(func, arg))
    }

    pub fn sin(a: Expr) -> Expr {
        Expr::apply(Func::Sin, a)
    }
    pub fn cos(a: Expr) -> Expr {
        Expr::apply(Func::Cos, a)
    }
    pub fn exp(a: Expr) -> Expr {
        Expr::apply(Func::Exp, a)
    }
    pub fn ln(a: Expr) -> Expr {
        Expr::apply(Func::Ln, a)
    }
    pub fn sqrt(a: Expr) -> Expr {
        Expr::apply(Func::Sqrt, a)
    }

    pub fn powi(&self, n: i64) -> Expr {
        Expr::pow(self, n)
    }

    pub fn recip(&self) -> Expr {
        Expr::pow(self, -1)
    }

    pub fn scale(&self, c: &Scalar) -> Expr {
        if let Node::Sum(v) = self.node() {
            return Expr::sum(v.iter().map(|t| t.scale(c)));
        }
        Expr::product([Expr::constant(c.clone()), self.clone()])
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.hash == other.0.hash && self.0.node == other.0.node)
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Structural total order: node kind first, then contents.
impl Ord for Expr {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        let (a, b) = (self.node(), other.node());
        a.rank().cmp(&b.rank()).then_with(|| match (a, b) {
            (Node::Const(x), Node::Const(y)) => x.cmp(y),
            (Node::Coord(x), Node::Coord(y)) => x.cmp(y),
            (Node::Geom(x), Node::Geom(y)) => x.cmp(y),
            (Node::Param(x), Node::Param(y)) => x.cmp(y),
            (Node::Sum(x), Node::Sum(y)) | (Node::Product(x), Node::Product(y)) => x.cmp(y),
            (Node::Pow(x, m), Node::Pow(y, n)) => x.cmp(y).then(m.cmp(n)),
            (Node::Apply(f, x), Node::Apply(g, y)) => f.cmp(g).then_with(|| x.cmp(y)),
            _ => unreachable!("rank already distinguishes node kinds"),
        })
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::lang::serialize_expr(self))
    }
}

macro_rules! expr_binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl<'a> $tr<&'a Expr> for &'a Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                let f: fn(&Expr, &Expr) -> Expr = $body;
                f(self, rhs)
            }
        }
        impl $tr<Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a Expr> for Expr {
            type Output = Expr;
            fn $m(self, rhs: &Expr) -> Expr {
                (&self).$m(rhs)
            }
        }
        impl<'a> $tr<Expr> for &'a Expr {
            type Output = Expr;
            fn $m(self, rhs: Expr) -> Expr {
                self.$m(&rhs)
            }
        }
    };
}

expr_binop!(Add, add, |a, b| Expr::sum([a.clone(), b.clone()]));
expr_binop!(Sub, sub, |a, b| Expr::sum([a.clone(), -b]));
expr_binop!(Mul, mul, |a, b| Expr::product([a.clone(), b.clone()]));
expr_binop!(Div, div, |a, b| Expr::product([a.clone(), b.recip()]));

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.scale(&Scalar::from(-1))
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -&self
    }
}

impl From<i64> for Expr {
    fn from(v: i64) -> Expr {
        Expr::int(v)
    }
}

impl From<Scalar> for Expr {
    fn from(v: Scalar) -> Expr {
        Expr::constant(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(a: usize) -> Expr {
        Expr::coord(a)
    }

    #[test]
    fn like_terms_cancel() {
        let e = &(&x(1) * &x(1)) - &Expr::pow(&x(1), 2);
        assert!(e.is_zero());
        let e = &(&x(2) + &x(1)) - &(&x(1) + &x(2));
        assert!(e.is_zero());
    }

    #[test]
    fn powers_merge_in_products() {
        let e = &Expr::pow(&x(1), 3) * &Expr::pow(&x(1), -3);
        assert!(e.is_one());
        let e = &Expr::r() / &Expr::r();
        assert!(e.is_one());
    }

    #[test]
    fn even_geometric_powers_become_polynomials() {
        let e = Expr::pow(&Expr::r(), 2) - Expr::rt_squared() - Expr::pow(&x(3), 2);
        assert!(e.is_zero());
        let e = &Expr::r() * &Expr::r();
        assert_eq!(e, Expr::r_squared());
        let e = Expr::pow(&Expr::rt(), -3);
        assert!(e.contains_geom(Geom::Rt));
        assert_eq!(&e * &Expr::rt(), Expr::pow(&Expr::rt_squared(), -1));
    }

    #[test]
    fn zero_annihilates() {
        assert!((&Expr::zero() * &Expr::phi()).is_zero());
    }

    #[test]
    fn canonical_order_is_insertion_independent() {
        let a = Expr::sum([x(3), Expr::param("c"), Expr::sin(Expr::phi()), x(1)]);
        let b = Expr::sum([Expr::sin(Expr::phi()), x(1), Expr::param("c"), x(3)]);
        assert_eq!(a, b);
        let a = Expr::product([x(3), Expr::param("c"), x(1)]);
        let b = Expr::product([x(1), x(3), Expr::param("c")]);
        assert_eq!(a, b);
    }
}
