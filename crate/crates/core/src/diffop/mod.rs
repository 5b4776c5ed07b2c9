//! Differential operators of order at most four with expression coefficients.
//!
//! An operator is stored as `sum_alpha c_alpha d^alpha` over multi-indices
//! `alpha = (a1, a2, a3)`. The totally symmetric tensor view is
//! `T_{i1..ik} = c_alpha / multinomial(alpha)`.

mod generators;
mod inversion;
mod recognize;

pub use generators::{expand_generators, Generator, GeneratorExpr};
pub use inversion::{inversion_conjugate, inverted_derivative};
pub use recognize::{decompose, recognize_generators, Decomposition};

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::expr::Expr;
use crate::normal::simplify;
use crate::scalar::Scalar;
use crate::zero::{certify_all, Policy, ZeroCertificate, ZeroError};

pub const MAX_ORDER: u32 = 4;

pub type Multi = [u8; 3];

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum DiffOpError {
    #[error("operator order {0} exceeds the cap of 4")]
    OrderOverflow(u32),
    #[error("operation needs order at most 2, got {0}")]
    OrderTooHigh(u32),
}

fn order_of(m: &Multi) -> u32 {
    m.iter().map(|&v| v as u32).sum()
}

fn factorial(n: u32) -> i64 {
    (1..=n as i64).product()
}

pub fn multinomial(m: &Multi) -> i64 {
    factorial(order_of(m)) / m.iter().map(|&v| factorial(v as u32)).product::<i64>()
}

fn binom(n: u8, k: u8) -> i64 {
    factorial(n as u32) / (factorial(k as u32) * factorial((n - k) as u32))
}

/// Multi-index of a list of axes (1-based).
pub fn multi_of(axes: &[usize]) -> Multi {
    let mut m = [0u8; 3];
    for &a in axes {
        m[a - 1] += 1;
    }
    m
}

fn sub_indices(m: &Multi) -> Vec<Multi> {
    let mut out = Vec::new();
    for a in 0..=m[0] {
        for b in 0..=m[1] {
            for c in 0..=m[2] {
                out.push([a, b, c]);
            }
        }
    }
    out
}

fn diff_multi(e: &Expr, m: &Multi) -> Expr {
    let mut out = e.clone();
    for (axis, &k) in m.iter().enumerate() {
        for _ in 0..k {
            out = out.diff(axis + 1);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct DiffOp {
    terms: BTreeMap<Multi, Expr>,
}

impl DiffOp {
    pub fn zero() -> DiffOp {
        DiffOp::default()
    }

    /// Multiplication by `e`.
    pub fn scalar(e: Expr) -> DiffOp {
        DiffOp::from_terms([([0, 0, 0], e)])
    }

    pub fn partial(axis: usize) -> DiffOp {
        DiffOp::from_terms([(multi_of(&[axis]), Expr::one())])
    }

    pub fn from_terms<I: IntoIterator<Item = (Multi, Expr)>>(terms: I) -> DiffOp {
        let mut out = BTreeMap::new();
        for (m, e) in terms {
            assert!(order_of(&m) <= MAX_ORDER, "order above cap");
            let slot = out.entry(m).or_insert_with(Expr::zero);
            *slot = &*slot + &e;
        }
        out.retain(|_, e: &mut Expr| !e.is_zero());
        DiffOp { terms: out }
    }

    pub fn order(&self) -> u32 {
        self.terms.keys().map(order_of).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Multi, &Expr)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Multi) -> Expr {
        self.terms.get(m).cloned().unwrap_or_else(Expr::zero)
    }

    /// Symmetric tensor component for the given axes (1-based).
    pub fn component(&self, axes: &[usize]) -> Expr {
        let m = multi_of(axes);
        self.coeff(&m).scale(&Scalar::ratio(1, multinomial(&m)))
    }

    /// Second-order symmetric tensor.
    pub fn mu(&self) -> [[Expr; 3]; 3] {
        std::array::from_fn(|a| std::array::from_fn(|b| self.component(&[a + 1, b + 1])))
    }

    pub fn first_order(&self) -> [Expr; 3] {
        std::array::from_fn(|a| self.coeff(&multi_of(&[a + 1])))
    }

    pub fn zeroth_order(&self) -> Expr {
        self.coeff(&[0, 0, 0])
    }

    pub fn add(&self, o: &DiffOp) -> DiffOp {
        DiffOp::from_terms(self.terms.iter().chain(o.terms.iter()).map(|(m, e)| (*m, e.clone())))
    }

    pub fn sub(&self, o: &DiffOp) -> DiffOp {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> DiffOp {
        self.scale(&Expr::int(-1))
    }

    /// Left multiplication by a scalar field.
    pub fn scale(&self, e: &Expr) -> DiffOp {
        DiffOp::from_terms(self.terms.iter().map(|(m, c)| (*m, c * e)))
    }

    pub fn scale_const(&self, s: &Scalar) -> DiffOp {
        DiffOp::from_terms(self.terms.iter().map(|(m, c)| (*m, c.scale(s))))
    }

    /// Coefficients through the normal form, dropping those that vanish.
    pub fn simplified(&self) -> DiffOp {
        DiffOp::from_terms(self.terms.iter().map(|(m, c)| (*m, simplify(c))))
    }

    /// `self` applied after `o`.
    pub fn compose(&self, o: &DiffOp) -> Result<DiffOp, DiffOpError> {
        let total = self.order() + o.order();
        if total > MAX_ORDER {
            return Err(DiffOpError::OrderOverflow(total));
        }
        let mut derivs: HashMap<(Multi, Multi), Expr> = HashMap::new();
        let mut out: BTreeMap<Multi, Vec<Expr>> = BTreeMap::new();
        for (alpha, a) in &self.terms {
            for (beta, b) in &o.terms {
                for gamma in sub_indices(alpha) {
                    let db = derivs
                        .entry((*beta, gamma))
                        .or_insert_with(|| diff_multi(b, &gamma))
                        .clone();
                    if db.is_zero() {
                        continue;
                    }
                    let c: i64 = (0..3).map(|i| binom(alpha[i], gamma[i])).product();
                    let idx = [0, 1, 2].map(|i| alpha[i] - gamma[i] + beta[i]);
                    out.entry(idx)
                        .or_default()
                        .push(Expr::product([Expr::int(c), a.clone(), db]));
                }
            }
        }
        Ok(DiffOp::from_terms(
            out.into_iter().map(|(m, v)| (m, simplify(&Expr::sum(v)))),
        ))
    }

    pub fn commutator(&self, o: &DiffOp) -> Result<DiffOp, DiffOpError> {
        Ok(self.compose(o)?.sub(&o.compose(self)?).simplified())
    }

    pub fn anticommutator(&self, o: &DiffOp) -> Result<DiffOp, DiffOpError> {
        Ok(self.compose(o)?.add(&o.compose(self)?).simplified())
    }

    /// Apply to a scalar field.
    pub fn apply(&self, psi: &Expr) -> Expr {
        Expr::sum(self.terms.iter().map(|(m, c)| c * &diff_multi(psi, m)))
    }

    /// One certificate for all coefficients.
    pub fn zero_certificate(&self, policy: &Policy) -> Result<ZeroCertificate, ZeroError> {
        let coeffs: Vec<Expr> = self.terms.values().cloned().collect();
        certify_all(&coeffs, policy)
    }

    /// Multi-indices in a fixed order, for reporting a failing component.
    pub fn multi_indices(&self) -> Vec<Multi> {
        self.terms.keys().copied().collect()
    }

    /// `d_b mu^{ab} d_a + eta`.
    pub fn from_selfadjoint(mu: &[[Expr; 3]; 3], eta: &Expr) -> DiffOp {
        let mut terms = vec![([0, 0, 0], eta.clone())];
        for a in 0..3 {
            for b in 0..3 {
                terms.push((multi_of(&[a + 1, b + 1]), mu[a][b].clone()));
                terms.push((multi_of(&[a + 1]), mu[a][b].diff(b + 1)));
            }
        }
        DiffOp::from_terms(terms.into_iter().map(|(m, e)| (m, simplify(&e))))
    }

    pub fn to_selfadjoint_form(&self) -> Result<SelfAdjointForm, DiffOpError> {
        let k = self.order();
        if k > 2 {
            return Err(DiffOpError::OrderTooHigh(k));
        }
        let mu = self.mu();
        let xi = self.first_order();
        let defect = std::array::from_fn(|a| {
            let div = Expr::sum((0..3).map(|b| mu[a][b].diff(b + 1)));
            simplify(&(&xi[a] - &div))
        });
        Ok(SelfAdjointForm {
            mu,
            eta: self.zeroth_order(),
            defect,
        })
    }
}

/// `d_b mu^{ab} d_a + eta` plus the defect `xi^a - mu^{ab}_b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelfAdjointForm {
    pub mu: [[Expr; 3]; 3],
    pub eta: Expr,
    pub defect: [Expr; 3],
}

impl SelfAdjointForm {
    pub fn defect_certificate(&self, policy: &Policy) -> Result<ZeroCertificate, ZeroError> {
        certify_all(&self.defect, policy)
    }
}

/// `H = p_a f p_a + V = -d_a f d_a + V`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hamiltonian {
    pub f: Expr,
    pub v: Expr,
}

impl Hamiltonian {
    pub fn new(f: Expr, v: Expr) -> Hamiltonian {
        Hamiltonian { f, v }
    }

    pub fn to_diffop(&self) -> DiffOp {
        from_hamiltonian(self)
    }
}

pub fn from_hamiltonian(h: &Hamiltonian) -> DiffOp {
    let mut terms = vec![([0, 0, 0], h.v.clone())];
    for a in 1..=3 {
        terms.push((multi_of(&[a, a]), -h.f.clone()));
        terms.push((multi_of(&[a]), -h.f.diff(a)));
    }
    DiffOp::from_terms(terms)
}

fn fmt_multi(m: &Multi) -> String {
    let mut s = String::new();
    for (i, &k) in m.iter().enumerate() {
        match k {
            0 => {}
            1 => s.push_str(&format!("d{}", i + 1)),
            _ => s.push_str(&format!("d{}^{}", i + 1, k)),
        }
    }
    s
}

/// `(c)*d1^2*d3 + ...`, highest order first.
impl fmt::Display for DiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut keys: Vec<&Multi> = self.terms.keys().collect();
        keys.sort_by(|a, b| order_of(b).cmp(&order_of(a)).then(b.cmp(a)));
        let parts: Vec<String> = keys
            .into_iter()
            .map(|m| {
                let c = &self.terms[m];
                let d = fmt_multi(m);
                if d.is_empty() {
                    format!("({c})")
                } else if c.is_one() {
                    d
                } else {
                    format!("({c})*{d}")
                }
            })
            .collect();
        f.write_str(&parts.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(a: usize) -> Expr {
        Expr::coord(a)
    }

    #[test]
    fn leibniz_on_multiplication() {
        let d1 = DiffOp::partial(1);
        let m = DiffOp::scalar(x(1));
        let c = d1.compose(&m).unwrap();
        let expected = DiffOp::from_terms([([1, 0, 0], x(1)), ([0, 0, 0], Expr::one())]);
        assert_eq!(c, expected);
    }

    #[test]
    fn momentum_squared() {
        let p3 = Generator::P(3).op();
        let sq = p3.compose(&p3).unwrap();
        assert_eq!(sq, DiffOp::from_terms([([0, 0, 2], Expr::int(-1))]));
    }

    #[test]
    fn order_cap() {
        let d = DiffOp::from_terms([([3, 0, 0], Expr::one())]);
        assert_eq!(d.compose(&d), Err(DiffOpError::OrderOverflow(6)));
    }

    #[test]
    fn selfadjoint_defect() {
        let lap = DiffOp::from_terms((1..=3).map(|a| (multi_of(&[a, a]), Expr::one())));
        let sa = lap.to_selfadjoint_form().unwrap();
        assert!(sa.defect.iter().all(Expr::is_zero));
        let q = DiffOp::from_terms([([1, 0, 0], Expr::one()), ([2, 0, 0], x(1))]);
        let sa = q.to_selfadjoint_form().unwrap();
        assert!(sa.defect[0].is_zero());
        let q = DiffOp::from_terms([([1, 0, 0], Expr::one()), ([2, 0, 0], x(2))]);
        assert!(!q.to_selfadjoint_form().unwrap().defect[0].is_zero());
    }

    #[test]
    fn hamiltonian_coefficients() {
        let f = Expr::pow(&x(3), 2);
        let v = &Expr::param("c") * &(&f / &Expr::pow(&x(1), 2));
        let h = from_hamiltonian(&Hamiltonian::new(f.clone(), v.clone()));
        assert_eq!(h.component(&[1, 1]), -f.clone());
        assert!(h.component(&[1, 2]).is_zero());
        assert_eq!(h.coeff(&[0, 0, 1]), &Expr::int(-2) * &x(3));
        assert_eq!(h.zeroth_order(), v);
    }
}
