use std::fmt;

use super::{multi_of, DiffOp, DiffOpError};
use crate::expr::Expr;
use crate::scalar::Scalar;

/// The ten generators of the conformal group of 3-space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Generator {
    P(u8),
    K(u8),
    L(u8),
    D,
}

fn levi(a: usize, b: usize, c: usize) -> i64 {
    match (a, b, c) {
        (1, 2, 3) | (2, 3, 1) | (3, 1, 2) => 1,
        (3, 2, 1) | (1, 3, 2) | (2, 1, 3) => -1,
        _ => 0,
    }
}

fn minus_i() -> Expr {
    Expr::constant(-Scalar::i())
}

impl Generator {
    pub fn all() -> [Generator; 10] {
        use Generator::*;
        [P(1), P(2), P(3), L(1), L(2), L(3), D, K(1), K(2), K(3)]
    }

    /// Expansion with `p_a = -i d_a`:
    /// `P_a = p_a`, `L_a = eps_abc x_b p_c`, `D = x_n p_n - 3i/2`,
    /// `K_a = r^2 p_a - 2 x_a D`.
    pub fn op(self) -> DiffOp {
        let x = |a: usize| Expr::coord(a);
        match self {
            Generator::P(a) => DiffOp::from_terms([(multi_of(&[a as usize]), minus_i())]),
            Generator::L(a) => {
                let a = a as usize;
                let mut terms = Vec::new();
                for b in 1..=3 {
                    for c in 1..=3 {
                        let e = levi(a, b, c);
                        if e != 0 {
                            terms.push((multi_of(&[c]), &(&Expr::int(e) * &minus_i()) * &x(b)));
                        }
                    }
                }
                DiffOp::from_terms(terms)
            }
            Generator::D => dilation(),
            Generator::K(a) => {
                let a = a as usize;
                let p = Generator::P(a as u8).op().scale(&Expr::r_squared());
                let d = dilation().scale(&(&Expr::int(-2) * &x(a)));
                p.add(&d).simplified()
            }
        }
    }
}

fn dilation() -> DiffOp {
    let mut terms: Vec<_> = (1..=3)
        .map(|n| (multi_of(&[n]), &minus_i() * &Expr::coord(n)))
        .collect();
    terms.push(([0, 0, 0], Expr::constant(Scalar::ratio(-3, 2) * Scalar::i())));
    DiffOp::from_terms(terms)
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::P(a) => write!(f, "P{a}"),
            Generator::K(a) => write!(f, "K{a}"),
            Generator::L(a) => write!(f, "L{a}"),
            Generator::D => write!(f, "D"),
        }
    }
}

/// Syntax tree over the generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GeneratorExpr {
    Gen(Generator),
    /// Multiplication by a scalar field.
    Scalar(Expr),
    Sum(Vec<GeneratorExpr>),
    /// Composition, leftmost applied last.
    Product(Vec<GeneratorExpr>),
    /// `{A,B} = AB + BA`.
    Anti(Box<GeneratorExpr>, Box<GeneratorExpr>),
}

impl GeneratorExpr {
    pub fn gen(g: Generator) -> GeneratorExpr {
        GeneratorExpr::Gen(g)
    }

    pub fn anti(a: GeneratorExpr, b: GeneratorExpr) -> GeneratorExpr {
        GeneratorExpr::Anti(Box::new(a), Box::new(b))
    }

    /// Upper bound on the operator order.
    pub fn order(&self) -> u32 {
        match self {
            GeneratorExpr::Gen(_) => 1,
            GeneratorExpr::Scalar(_) => 0,
            GeneratorExpr::Sum(v) => v.iter().map(Self::order).max().unwrap_or(0),
            GeneratorExpr::Product(v) => v.iter().map(Self::order).sum(),
            GeneratorExpr::Anti(a, b) => a.order() + b.order(),
        }
    }

    /// All scalar leaves, in order.
    pub fn scalars(&self) -> Vec<Expr> {
        let mut out = Vec::new();
        self.walk_scalars(&mut out);
        out
    }

    fn walk_scalars(&self, out: &mut Vec<Expr>) {
        match self {
            GeneratorExpr::Scalar(e) => out.push(e.clone()),
            GeneratorExpr::Gen(_) => {}
            GeneratorExpr::Sum(v) | GeneratorExpr::Product(v) => v.iter().for_each(|g| g.walk_scalars(out)),
            GeneratorExpr::Anti(a, b) => {
                a.walk_scalars(out);
                b.walk_scalars(out);
            }
        }
    }

    /// Replace every scalar leaf.
    pub fn map_scalars(&self, f: &dyn Fn(&Expr) -> Expr) -> GeneratorExpr {
        match self {
            GeneratorExpr::Scalar(e) => GeneratorExpr::Scalar(f(e)),
            GeneratorExpr::Gen(g) => GeneratorExpr::Gen(*g),
            GeneratorExpr::Sum(v) => GeneratorExpr::Sum(v.iter().map(|g| g.map_scalars(f)).collect()),
            GeneratorExpr::Product(v) => GeneratorExpr::Product(v.iter().map(|g| g.map_scalars(f)).collect()),
            GeneratorExpr::Anti(a, b) => GeneratorExpr::anti(a.map_scalars(f), b.map_scalars(f)),
        }
    }

    pub fn generators(&self) -> Vec<Generator> {
        let mut out = Vec::new();
        self.walk_gens(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn walk_gens(&self, out: &mut Vec<Generator>) {
        match self {
            GeneratorExpr::Gen(g) => out.push(*g),
            GeneratorExpr::Scalar(_) => {}
            GeneratorExpr::Sum(v) | GeneratorExpr::Product(v) => v.iter().for_each(|g| g.walk_gens(out)),
            GeneratorExpr::Anti(a, b) => {
                a.walk_gens(out);
                b.walk_gens(out);
            }
        }
    }

    /// The sum of top-level scalar terms, i.e. the additive correction.
    pub fn scalar_part(&self) -> Expr {
        match self {
            GeneratorExpr::Scalar(e) => e.clone(),
            GeneratorExpr::Sum(v) => Expr::sum(v.iter().filter_map(|g| match g {
                GeneratorExpr::Scalar(e) => Some(e.clone()),
                _ => None,
            })),
            _ => Expr::zero(),
        }
    }
}

pub fn expand_generators(g: &GeneratorExpr) -> Result<DiffOp, DiffOpError> {
    match g {
        GeneratorExpr::Gen(x) => Ok(x.op()),
        GeneratorExpr::Scalar(e) => Ok(DiffOp::scalar(e.clone())),
        GeneratorExpr::Sum(v) => {
            let mut acc = DiffOp::zero();
            for t in v {
                acc = acc.add(&expand_generators(t)?);
            }
            Ok(acc.simplified())
        }
        GeneratorExpr::Product(v) => {
            let mut acc = DiffOp::scalar(Expr::one());
            for t in v {
                acc = acc.compose(&expand_generators(t)?)?;
            }
            Ok(acc)
        }
        GeneratorExpr::Anti(a, b) => expand_generators(a)?.anticommutator(&expand_generators(b)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_operator;
    use crate::zero::Policy;

    fn op(s: &str) -> DiffOp {
        expand_generators(&parse_operator(s).unwrap()).unwrap()
    }

    #[test]
    fn dilation_momentum() {
        let c = Generator::D.op().commutator(&Generator::P(3).op()).unwrap();
        let expected = Generator::P(3).op().scale_const(&Scalar::i());
        assert!(c.sub(&expected).simplified().is_zero());
    }

    #[test]
    fn rotation_closure() {
        // [L1, L2] = i L3
        let c = Generator::L(1).op().commutator(&Generator::L(2).op()).unwrap();
        let expected = Generator::L(3).op().scale_const(&Scalar::i());
        assert!(c.sub(&expected).simplified().is_zero());
    }

    #[test]
    fn scalar_terms_are_order_zero() {
        let q = op("{P3,K3} + 4*G");
        assert_eq!(q.order(), 2);
        let cert = q.to_selfadjoint_form().unwrap().defect_certificate(&Policy::default()).unwrap();
        assert!(cert.is_exact_zero());
    }
}
