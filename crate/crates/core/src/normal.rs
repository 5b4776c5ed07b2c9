//! Kernel-rational normal form.
//!
//! An expression is mapped to a quotient of polynomials whose variables are
//! the coordinates, `r`, `rt`, parameters, and opaque kernels (`phi`,
//! `theta`, and every function application). Numerators are reduced with
//! `r^2 = x1^2+x2^2+x3^2` and `rt^2 = x1^2+x2^2`, so each numerator is linear
//! in `r` and in `rt`. Denominators never contain `r` or `rt`: they are
//! rationalised with the conjugate. A denominator is kept as a monomial times
//! a list of monic polynomial factors with multiplicities, and numerators
//! are divided by those factors whenever the division is exact.
//!
//! When no kernel occurs the numerator vanishes exactly when the expression
//! vanishes identically, since `1, r, rt, r*rt` are independent over the
//! rational functions in the coordinates.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{Expr, Geom, Node};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NormalError {
    #[error("division by an expression that is identically zero")]
    DivisionByZero,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    X(u8),
    R,
    Rt,
    Param(Arc<str>),
    Kernel(Expr),
}

impl Var {
    fn to_expr(&self) -> Expr {
        match self {
            Var::X(a) => Expr::coord(*a as usize),
            Var::R => Expr::r(),
            Var::Rt => Expr::rt(),
            Var::Param(p) => Expr::param(p),
            Var::Kernel(e) => e.clone(),
        }
    }
}

/// Power product, sorted by variable, no zero exponents.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Mono(Vec<(Var, u32)>);

impl Mono {
    pub fn one() -> Mono {
        Mono(Vec::new())
    }

    pub fn var(v: Var, e: u32) -> Mono {
        if e == 0 {
            Mono::one()
        } else {
            Mono(vec![(v, e)])
        }
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self, v: &Var) -> u32 {
        self.0
            .iter()
            .find(|(w, _)| w == v)
            .map(|(_, e)| *e)
            .unwrap_or(0)
    }

    pub fn vars(&self) -> impl Iterator<Item = &(Var, u32)> {
        self.0.iter()
    }

    pub fn mul(&self, o: &Mono) -> Mono {
        let mut out = Vec::with_capacity(self.0.len() + o.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < o.0.len() {
            match self.0[i].0.cmp(&o.0[j].0) {
                Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(o.0[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.0[i].0.clone(), self.0[i].1 + o.0[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&o.0[j..]);
        Mono(out)
    }

    pub fn divides(&self, o: &Mono) -> bool {
        self.0.iter().all(|(v, e)| o.degree(v) >= *e)
    }

    /// `o / self`, assuming divisibility.
    pub fn div_into(&self, o: &Mono) -> Mono {
        Mono(
            o.0.iter()
                .filter_map(|(v, e)| {
                    let d = e - self.degree(v);
                    (d > 0).then(|| (v.clone(), d))
                })
                .collect(),
        )
    }

    fn gcd(&self, o: &Mono) -> Mono {
        Mono(
            self.0
                .iter()
                .filter_map(|(v, e)| {
                    let d = (*e).min(o.degree(v));
                    (d > 0).then(|| (v.clone(), d))
                })
                .collect(),
        )
    }

    fn lcm(&self, o: &Mono) -> Mono {
        let g = self.gcd(o);
        g.div_into(&self.mul(o))
    }

    fn to_expr(&self) -> Expr {
        Expr::product(self.0.iter().map(|(v, e)| Expr::pow(&v.to_expr(), *e as i64)))
    }
}

/// Lexicographic: the first variable (in `Var` order) where exponents differ decides.
impl Ord for Mono {
    fn cmp(&self, o: &Mono) -> Ordering {
        let (mut i, mut j) = (0, 0);
        loop {
            match (self.0.get(i), o.0.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some((v, e)), Some((w, f))) => match v.cmp(w) {
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Equal => match e.cmp(f) {
                        Ordering::Equal => {
                            i += 1;
                            j += 1;
                        }
                        ord => return ord,
                    },
                },
            }
        }
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, o: &Mono) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Poly(BTreeMap<Mono, Scalar>);

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }

    pub fn constant(c: Scalar) -> Poly {
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.0.insert(Mono::one(), c);
        }
        p
    }

    pub fn one() -> Poly {
        Poly::constant(Scalar::one())
    }

    pub fn var(v: Var) -> Poly {
        let mut p = Poly::zero();
        p.0.insert(Mono::var(v, 1), Scalar::one());
        p
    }

    pub fn monomial(m: Mono, c: Scalar) -> Poly {
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.0.insert(m, c);
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_constant(&self) -> Option<Scalar> {
        match self.0.len() {
            0 => Some(Scalar::zero()),
            1 => {
                let (m, c) = self.0.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &Scalar)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn leading(&self) -> Option<(&Mono, &Scalar)> {
        self.0.iter().next_back()
    }

    pub fn has_var(&self, v: &Var) -> bool {
        self.0.keys().any(|m| m.degree(v) > 0)
    }

    pub fn has_kernel(&self) -> bool {
        self.0
            .keys()
            .any(|m| m.vars().any(|(v, _)| matches!(v, Var::Kernel(_))))
    }

    fn add_term(&mut self, m: Mono, c: &Scalar) {
        if c.is_zero() {
            return;
        }
        match self.0.get_mut(&m) {
            Some(slot) => {
                *slot += c;
                if slot.is_zero() {
                    self.0.remove(&m);
                }
            }
            None => {
                self.0.insert(m, c.clone());
            }
        }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &o.0 {
            out.add_term(m.clone(), c);
        }
        out
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &o.0 {
            out.add_term(m.clone(), &-c);
        }
        out
    }

    pub fn scale(&self, s: &Scalar) -> Poly {
        if s.is_zero() {
            return Poly::zero();
        }
        Poly(self.0.iter().map(|(m, c)| (m.clone(), c * s)).collect())
    }

    fn mul_mono(&self, m: &Mono, s: &Scalar) -> Poly {
        let mut out = Poly::zero();
        for (n, c) in &self.0 {
            for (rm, rc) in reduce_mono(&m.mul(n)) {
                out.add_term(rm, &(&(c * s) * &rc));
            }
        }
        out
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        let (small, big) = if self.len() <= o.len() { (self, o) } else { (o, self) };
        let mut out = Poly::zero();
        for (m, c) in &small.0 {
            for (n, d) in &big.0 {
                let prod = m.mul(n);
                let cd = c * d;
                if needs_reduction(&prod) {
                    for (rm, rc) in reduce_mono(&prod) {
                        out.add_term(rm, &(&cd * &rc));
                    }
                } else {
                    out.add_term(prod, &cd);
                }
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut acc = Poly::one();
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Exact quotient `self / d`, or `None` when `d` does not divide.
    /// Both must be free of `r` and `rt` in `d`.
    pub fn div_exact(&self, d: &Poly) -> Option<Poly> {
        let (lm, lc) = d.leading()?;
        let (lm, lc) = (lm.clone(), lc.clone());
        let mut rem = self.clone();
        let mut q = Poly::zero();
        while let Some((m, c)) = rem.leading() {
            if !lm.divides(m) {
                return None;
            }
            let tm = lm.div_into(m);
            let tc = c / &lc;
            rem = rem.sub(&d.mul_mono(&tm, &tc));
            q.add_term(tm, &tc);
        }
        Some(q)
    }

    /// Greatest monomial dividing every term.
    fn content_mono(&self) -> Mono {
        let mut it = self.0.keys();
        let Some(first) = it.next() else {
            return Mono::one();
        };
        it.fold(first.clone(), |g, m| g.gcd(m))
    }

    fn div_mono(&self, m: &Mono) -> Poly {
        Poly(self.0.iter().map(|(n, c)| (m.div_into(n), c.clone())).collect())
    }

    /// Split `self = a + b*v` for `v` of degree at most one.
    fn split_linear(&self, v: &Var) -> (Poly, Poly) {
        let mut a = Poly::zero();
        let mut b = Poly::zero();
        let vm = Mono::var(v.clone(), 1);
        for (m, c) in &self.0 {
            if m.degree(v) > 0 {
                b.add_term(vm.div_into(m), c);
            } else {
                a.add_term(m.clone(), c);
            }
        }
        (a, b)
    }

    pub fn to_expr(&self) -> Expr {
        Expr::sum(self.0.iter().rev().map(|(m, c)| {
            Expr::product([Expr::constant(c.clone()), m.to_expr()])
        }))
    }
}

fn needs_reduction(m: &Mono) -> bool {
    m.degree(&Var::R) >= 2 || m.degree(&Var::Rt) >= 2
}

fn r2_poly() -> Poly {
    let mut p = Poly::zero();
    for a in 1..=3 {
        p.add_term(Mono::var(Var::X(a), 2), &Scalar::one());
    }
    p
}

fn rt2_poly() -> Poly {
    let mut p = Poly::zero();
    for a in 1..=2 {
        p.add_term(Mono::var(Var::X(a), 2), &Scalar::one());
    }
    p
}

/// Rewrite even powers of `r` and `rt` in a monomial.
fn reduce_mono(m: &Mono) -> Vec<(Mono, Scalar)> {
    let er = m.degree(&Var::R);
    let et = m.degree(&Var::Rt);
    if er < 2 && et < 2 {
        return vec![(m.clone(), Scalar::one())];
    }
    let rest = Mono(
        m.0.iter()
            .filter_map(|(v, e)| match v {
                Var::R => (er % 2 == 1).then(|| (Var::R, 1)),
                Var::Rt => (et % 2 == 1).then(|| (Var::Rt, 1)),
                _ => Some((v.clone(), *e)),
            })
            .collect(),
    );
    let expansion = r2_poly().pow(er / 2).mul(&rt2_poly().pow(et / 2));
    expansion
        .0
        .into_iter()
        .map(|(n, c)| (rest.mul(&n), c))
        .collect()
}

/// Quotient with a factored, `r`/`rt`-free denominator.
#[derive(Clone, Debug)]
pub struct RatFunc {
    num: Poly,
    den_mono: Mono,
    factors: Vec<(Poly, u32)>,
}

impl RatFunc {
    pub fn from_poly(p: Poly) -> RatFunc {
        RatFunc {
            num: p,
            den_mono: Mono::one(),
            factors: Vec::new(),
        }
    }

    pub fn zero() -> RatFunc {
        RatFunc::from_poly(Poly::zero())
    }

    pub fn constant(c: Scalar) -> RatFunc {
        RatFunc::from_poly(Poly::constant(c))
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn has_kernel(&self) -> bool {
        self.num.has_kernel()
            || self.den_mono.vars().any(|(v, _)| matches!(v, Var::Kernel(_)))
            || self.factors.iter().any(|(f, _)| f.has_kernel())
    }

    pub fn is_polynomial(&self) -> bool {
        self.den_mono.is_one() && self.factors.is_empty()
    }

    pub fn as_constant(&self) -> Option<Scalar> {
        if self.is_polynomial() {
            self.num.as_constant()
        } else {
            None
        }
    }

    /// The full denominator as one polynomial.
    pub fn denominator(&self) -> Poly {
        let mut d = Poly::monomial(self.den_mono.clone(), Scalar::one());
        for (f, k) in &self.factors {
            d = d.mul(&f.pow(*k));
        }
        d
    }

    pub fn add(&self, o: &RatFunc) -> RatFunc {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        let den_mono = self.den_mono.lcm(&o.den_mono);
        let mut factors = self.factors.clone();
        for (f, k) in &o.factors {
            match factors.iter_mut().find(|(g, _)| g == f) {
                Some(slot) => slot.1 = slot.1.max(*k),
                None => factors.push((f.clone(), *k)),
            }
        }
        let lift = |r: &RatFunc| -> Poly {
            let mut p = r.num.mul_mono(&r.den_mono.div_into(&den_mono), &Scalar::one());
            for (f, k) in &factors {
                let have = r
                    .factors
                    .iter()
                    .find(|(g, _)| g == f)
                    .map(|(_, j)| *j)
                    .unwrap_or(0);
                if *k > have {
                    p = p.mul(&f.pow(k - have));
                }
            }
            p
        };
        let num = lift(self).add(&lift(o));
        RatFunc {
            num,
            den_mono,
            factors,
        }
        .cancelled()
    }

    pub fn neg(&self) -> RatFunc {
        RatFunc {
            num: self.num.scale(&Scalar::from(-1)),
            den_mono: self.den_mono.clone(),
            factors: self.factors.clone(),
        }
    }

    pub fn sub(&self, o: &RatFunc) -> RatFunc {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &RatFunc) -> RatFunc {
        if self.is_zero() || o.is_zero() {
            return RatFunc::zero();
        }
        let mut factors = self.factors.clone();
        for (f, k) in &o.factors {
            match factors.iter_mut().find(|(g, _)| g == f) {
                Some(slot) => slot.1 += k,
                None => factors.push((f.clone(), *k)),
            }
        }
        RatFunc {
            num: self.num.mul(&o.num),
            den_mono: self.den_mono.mul(&o.den_mono),
            factors,
        }
        .cancelled()
    }

    pub fn inv(&self) -> Result<RatFunc, NormalError> {
        if self.num.is_zero() {
            return Err(NormalError::DivisionByZero);
        }
        let mut num = self.denominator();
        let mut den = self.num.clone();
        for v in [Var::R, Var::Rt] {
            if den.has_var(&v) {
                let (a, b) = den.split_linear(&v);
                let sq = if v == Var::R { r2_poly() } else { rt2_poly() };
                let conj = a.sub(&b.mul(&Poly::var(v.clone())));
                num = num.mul(&conj);
                den = a.mul(&a).sub(&b.mul(&b).mul(&sq));
                if den.is_zero() {
                    return Err(NormalError::DivisionByZero);
                }
            }
        }
        let content = den.content_mono();
        let rest = den.div_mono(&content);
        let mut out = RatFunc {
            num,
            den_mono: content,
            factors: Vec::new(),
        };
        if let Some(c) = rest.as_constant() {
            out.num = out.num.scale(&c.inv().expect("nonzero"));
        } else {
            let lc = rest.leading().unwrap().1.clone();
            let inv = lc.inv().expect("nonzero");
            out.num = out.num.scale(&inv);
            out.factors.push((rest.scale(&inv), 1));
        }
        Ok(out.cancelled())
    }

    pub fn pow(&self, n: i64) -> Result<RatFunc, NormalError> {
        let base = if n < 0 { self.inv()? } else { self.clone() };
        let mut e = n.unsigned_abs();
        let mut acc = RatFunc::constant(Scalar::one());
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&sq);
            }
            e >>= 1;
            if e > 0 {
                sq = sq.mul(&sq);
            }
        }
        Ok(acc)
    }

    fn cancelled(mut self) -> RatFunc {
        if self.num.is_zero() {
            return RatFunc::zero();
        }
        if !self.den_mono.is_one() {
            let g = self.num.content_mono().gcd(&self.den_mono);
            if !g.is_one() {
                self.num = self.num.div_mono(&g);
                self.den_mono = g.div_into(&self.den_mono);
            }
        }
        for (f, k) in self.factors.iter_mut() {
            while *k > 0 {
                match self.num.div_exact(f) {
                    Some(q) => {
                        self.num = q;
                        *k -= 1;
                    }
                    None => break,
                }
            }
        }
        self.factors.retain(|(_, k)| *k > 0);
        self
    }

    pub fn to_expr(&self) -> Expr {
        let mut parts = vec![self.num.to_expr()];
        if !self.den_mono.is_one() {
            parts.push(Expr::pow(&self.den_mono.to_expr(), -1));
        }
        for (f, k) in &self.factors {
            parts.push(Expr::pow(&f.to_expr(), -(*k as i64)));
        }
        Expr::product(parts)
    }
}

/// Equality as quotients: cross-multiplied numerators agree.
impl PartialEq for RatFunc {
    fn eq(&self, o: &RatFunc) -> bool {
        self.num.mul(&o.denominator()) == o.num.mul(&self.denominator())
    }
}

impl fmt::Display for RatFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_expr())
    }
}

/// Normal form of an expression.
pub fn normalize(e: &Expr) -> Result<RatFunc, NormalError> {
    let mut memo = HashMap::new();
    norm_memo(e, &mut memo)
}

/// Normalise and convert back; leaves `e` unchanged if normalisation fails.
pub fn simplify(e: &Expr) -> Expr {
    if e.as_const().is_some() {
        return e.clone();
    }
    normalize(e).map(|n| n.to_expr()).unwrap_or_else(|_| e.clone())
}

fn norm_memo(e: &Expr, memo: &mut HashMap<Expr, RatFunc>) -> Result<RatFunc, NormalError> {
    if let Some(v) = memo.get(e) {
        return Ok(v.clone());
    }
    let v = match e.node() {
        Node::Const(c) => RatFunc::constant(c.clone()),
        Node::Coord(a) => RatFunc::from_poly(Poly::var(Var::X(*a))),
        Node::Geom(Geom::R) => RatFunc::from_poly(Poly::var(Var::R)),
        Node::Geom(Geom::Rt) => RatFunc::from_poly(Poly::var(Var::Rt)),
        Node::Geom(_) => RatFunc::from_poly(Poly::var(Var::Kernel(e.clone()))),
        Node::Param(p) => RatFunc::from_poly(Poly::var(Var::Param(p.clone()))),
        Node::Sum(v) => {
            let mut acc = RatFunc::zero();
            for t in v {
                acc = acc.add(&norm_memo(t, memo)?);
            }
            acc
        }
        Node::Product(v) => {
            let mut acc = RatFunc::constant(Scalar::one());
            for t in v {
                acc = acc.mul(&norm_memo(t, memo)?);
            }
            acc
        }
        Node::Pow(b, n) => norm_memo(b, memo)?.pow(*n)?,
        Node::Apply(f, a) => {
            let arg = norm_memo(a, memo)?.to_expr();
            let k = Expr::apply(*f, arg);
            match k.as_const() {
                Some(c) => RatFunc::constant(c.clone()),
                None => RatFunc::from_poly(Poly::var(Var::Kernel(k))),
            }
        }
    };
    memo.insert(e.clone(), v.clone());
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(a: usize) -> Expr {
        Expr::coord(a)
    }

    #[test]
    fn polynomial_cancellation() {
        let e = &(&x(1) * &x(1)) - &(&x(1) * &x(1));
        assert!(normalize(&e).unwrap().is_zero());
    }

    #[test]
    fn quotient_cancels_common_factor() {
        // (x1^2 - x2^2)/(x1 - x2) - (x1 + x2) = 0
        let num = &(&x(1) * &x(1)) - &(&x(2) * &x(2));
        let e = &(&num / &(&x(1) - &x(2))) - &(&x(1) + &x(2));
        assert!(normalize(&e).unwrap().is_zero());
    }

    #[test]
    fn radicals_are_reduced() {
        // r^2 - rt^2 - x3^2, (1/r) * r - 1, x3/r - x3*r/r^2
        let a = &(&Expr::r_squared() - &Expr::rt_squared()) - &(&x(3) * &x(3));
        assert!(normalize(&a).unwrap().is_zero());
        let b = &(&Expr::r().recip() * &Expr::r()) - &Expr::one();
        assert!(normalize(&b).unwrap().is_zero());
        let c = &(&x(3) / &Expr::r()) - &(&(&x(3) * &Expr::r()) / &Expr::r_squared());
        assert!(normalize(&c).unwrap().is_zero());
    }

    #[test]
    fn rationalised_denominator() {
        // 1/(1+r) - (r-1)/(r^2-1) = 0
        let one = Expr::one();
        let a = (&one + &Expr::r()).recip();
        let b = &(&Expr::r() - &one) / &(&Expr::r_squared() - &one);
        assert!(normalize(&(&a - &b)).unwrap().is_zero());
    }

    #[test]
    fn kernels_stay_opaque() {
        let s = Expr::sin(Expr::phi());
        let c = Expr::cos(Expr::phi());
        let e = &(&(&s * &s) + &(&c * &c)) - &Expr::one();
        let n = normalize(&e).unwrap();
        assert!(!n.is_zero());
        assert!(n.has_kernel());
    }

    #[test]
    fn zero_division_is_reported() {
        let e = Expr::pow(&(&x(1) - &x(1)), -1);
        assert_eq!(normalize(&e).unwrap_err(), NormalError::DivisionByZero);
    }

    #[test]
    fn round_trip_through_expr() {
        let e = &(&x(1) / &(&x(2) + &x(3))) + &(&Expr::param("c") / &Expr::rt());
        let n = normalize(&e).unwrap();
        let back = normalize(&n.to_expr()).unwrap();
        assert_eq!(n, back);
        assert!(normalize(&(&n.to_expr() - &e)).unwrap().is_zero());
    }
}
