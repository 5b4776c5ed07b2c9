//! Membership of an operator in the constant-coefficient span of others.

use std::collections::BTreeSet;

use super::{DiffOp, Generator, GeneratorExpr, Multi};
use crate::expr::Expr;
use crate::sample::{sample_rows, Cell};
use crate::scalar::Scalar;
use crate::zero::{Policy, ZeroCertificate};

#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    pub coefficients: Vec<Scalar>,
    pub certificate: ZeroCertificate,
}

/// Find constants `c_k` with `target = sum_k c_k basis_k`, certified.
pub fn decompose(target: &DiffOp, basis: &[DiffOp], policy: &Policy) -> Option<Decomposition> {
    let mut keys: BTreeSet<Multi> = target.multi_indices().into_iter().collect();
    for b in basis {
        keys.extend(b.multi_indices());
    }
    let keys: Vec<Multi> = keys.into_iter().collect();
    let n = basis.len();
    if n == 0 {
        let certificate = target.zero_certificate(policy).ok()?;
        return certificate.is_zero().then_some(Decomposition {
            coefficients: vec![],
            certificate,
        });
    }
    let cells: Vec<Cell> = keys.iter().map(|m| (basis.iter().map(|b| b.coeff(m)).collect(), target.coeff(m))).collect();
    let npoints = (2 * n).div_ceil(keys.len().max(1)) + 3;
    let rows = sample_rows(&cells, n, npoints, policy.seed ^ 0xdec0, true).ok()?;
    let coefficients = rows.solve(n)?;
    let mut residual = target.clone();
    for (c, op) in coefficients.iter().zip(basis) {
        if !c.is_zero() {
            residual = residual.sub(&op.scale_const(c));
        }
    }
    let certificate = residual.simplified().zero_certificate(policy).ok()?;
    certificate.is_zero().then_some(Decomposition {
        coefficients,
        certificate,
    })
}

/// Express an operator of order at most one through the ten generators and
/// the identity.
pub fn recognize_generators(op: &DiffOp, policy: &Policy) -> Option<GeneratorExpr> {
    if op.order() > 1 {
        return None;
    }
    let gens = Generator::all();
    let mut basis: Vec<DiffOp> = gens.iter().map(|g| g.op()).collect();
    basis.push(DiffOp::scalar(Expr::one()));
    let d = decompose(op, &basis, policy)?;
    let mut terms = Vec::new();
    for (k, c) in d.coefficients.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let coef = GeneratorExpr::Scalar(Expr::constant(c.clone()));
        if k < gens.len() {
            let g = GeneratorExpr::Gen(gens[k]);
            terms.push(if c.is_one() { g } else { GeneratorExpr::Product(vec![coef, g]) });
        } else {
            terms.push(coef);
        }
    }
    Some(match terms.len() {
        0 => GeneratorExpr::Scalar(Expr::zero()),
        1 => terms.pop().unwrap(),
        _ => GeneratorExpr::Sum(terms),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dilation_bracket_is_i_p() {
        let c = Generator::D.op().commutator(&Generator::P(3).op()).unwrap();
        let g = recognize_generators(&c, &Policy::default()).unwrap();
        assert_eq!(g.to_string(), "i*P3");
    }

    #[test]
    fn non_member_is_rejected() {
        let op = DiffOp::scalar(Expr::coord(1));
        let basis = vec![Generator::P(1).op()];
        assert!(decompose(&op, &basis, &Policy::default()).is_none());
    }
}
