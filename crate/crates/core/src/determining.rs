//! Determining equations of `[H, Q] = 0` for `H = -d_a f d_a + V` and
//! `Q = mu^{ab} d_a d_b + xi^a d_a + eta`, and recovery of `eta` from its gradient.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::expr::Expr;
use crate::killing::{killing_residuals, trace_vector, Tensor};
use crate::normal::simplify;
use crate::sample::{sample_rows, Cell};
use crate::scalar::Scalar;
use crate::zero::{certify_all, Policy, ZeroCertificate, ZeroError};

fn d(e: &Expr, a: usize) -> Expr {
    e.diff(a + 1)
}

fn sum<I: IntoIterator<Item = Expr>>(it: I) -> Expr {
    Expr::sum(it)
}

fn delta(a: usize, b: usize) -> Expr {
    Expr::int((a == b) as i64)
}

/// Residuals of the six-equation block. The first three families are the
/// retained equations; `second_order`, `trace` and `divergence` are their
/// differential consequences.
#[derive(Clone, Debug, PartialEq)]
pub struct DeterminingResiduals {
    /// Killing identity, one entry per `a <= b <= c`.
    pub third_order: Vec<Expr>,
    /// `(mu^nn_a + 2 mu^na_n) f - 5 mu^an f_n`.
    pub f_equation: [Expr; 3],
    /// `2 f eta_a + xi^a_n f_n - xi^n f_an + f xi^a_nn + 2 mu^an V_n - mu^mn f_mna`.
    pub first_order: [Expr; 3],
    /// The `(a, b)` equation for `a <= b`.
    pub second_order: Vec<Expr>,
    /// `f (mu^mm_nn + 2 xi^n_n) + (mu^nn_m - 3 xi^m) f_m - 5 mu^mn f_mn`.
    pub trace: Expr,
    /// `(f eta_n)_n + xi^n V_n + mu^mn V_mn`.
    pub divergence: Expr,
}

impl DeterminingResiduals {
    pub fn retained(&self) -> Vec<Expr> {
        let mut v = self.third_order.clone();
        v.extend(self.f_equation.iter().cloned());
        v.extend(self.first_order.iter().cloned());
        v
    }

    pub fn consequences(&self) -> Vec<Expr> {
        let mut v = self.second_order.clone();
        v.push(self.trace.clone());
        v.push(self.divergence.clone());
        v
    }

    pub fn all(&self) -> Vec<Expr> {
        let mut v = self.retained();
        v.extend(self.consequences());
        v
    }

    pub fn certificate(&self, policy: &Policy) -> Result<ZeroCertificate, ZeroError> {
        certify_all(&self.all(), policy)
    }
}

/// `xi^a = mu^{ab}_b`.
pub fn divergence(mu: &Tensor) -> [Expr; 3] {
    std::array::from_fn(|a| simplify(&sum((0..3).map(|b| d(&mu[a][b], b)))))
}

pub fn f_equation(mu: &Tensor, f: &Expr) -> [Expr; 3] {
    let t = trace_vector(mu);
    let fd: [Expr; 3] = std::array::from_fn(|n| d(f, n));
    std::array::from_fn(|a| {
        let lhs = &t[a] * f;
        let rhs = sum((0..3).map(|n| &mu[a][n] * &fd[n])).scale(&Scalar::from(5));
        simplify(&(&lhs - &rhs))
    })
}

pub fn second_order_equation(mu: &Tensor, xi: &[Expr; 3], f: &Expr) -> Vec<Expr> {
    let fd: [Expr; 3] = std::array::from_fn(|n| d(f, n));
    let fdd: [[Expr; 3]; 3] = std::array::from_fn(|m| std::array::from_fn(|n| d(&fd[m], n)));
    let mut out = Vec::new();
    for a in 0..3 {
        for b in a..3 {
            let lap = sum((0..3).map(|n| d(&d(&mu[a][b], n), n)));
            let first = &(&lap + &(&d(&xi[a], b) + &d(&xi[b], a))) * f;
            let terms = [
                first,
                sum((0..3).map(|n| &d(&mu[a][b], n) * &fd[n])),
                -sum((0..3).map(|n| &mu[n][a] * &fdd[n][b])),
                -sum((0..3).map(|n| &mu[n][b] * &fdd[n][a])),
                -(&delta(a, b)
                    * &(&sum((0..3).flat_map(|m| (0..3).map(move |n| (m, n))).map(|(m, n)| &mu[m][n] * &fdd[m][n]))
                        + &sum((0..3).map(|n| &xi[n] * &fd[n])))),
            ];
            out.push(simplify(&sum(terms)));
        }
    }
    out
}

pub fn trace_equation(mu: &Tensor, xi: &[Expr; 3], f: &Expr) -> Expr {
    let fd: [Expr; 3] = std::array::from_fn(|n| d(f, n));
    let tr = sum((0..3).map(|m| mu[m][m].clone()));
    let lap_tr = sum((0..3).map(|n| d(&d(&tr, n), n)));
    let div_xi = sum((0..3).map(|n| d(&xi[n], n)));
    let first = f * &(&lap_tr + &div_xi.scale(&Scalar::from(2)));
    let second = sum((0..3).map(|m| &(&d(&tr, m) - &xi[m].scale(&Scalar::from(3))) * &fd[m]));
    let third = sum((0..3).flat_map(|m| (0..3).map(move |n| (m, n))).map(|(m, n)| &mu[m][n] * &d(&fd[m], n)))
        .scale(&Scalar::from(-5));
    simplify(&sum([first, second, third]))
}

pub fn first_order_equation(mu: &Tensor, xi: &[Expr; 3], eta: &Expr, f: &Expr, v: &Expr) -> [Expr; 3] {
    let fd: [Expr; 3] = std::array::from_fn(|n| d(f, n));
    let vd: [Expr; 3] = std::array::from_fn(|n| d(v, n));
    std::array::from_fn(|a| {
        let terms = [
            (f * &d(eta, a)).scale(&Scalar::from(2)),
            sum((0..3).map(|n| &d(&xi[a], n) * &fd[n])),
            -sum((0..3).map(|n| &xi[n] * &d(&fd[a], n))),
            f * &sum((0..3).map(|n| d(&d(&xi[a], n), n))),
            sum((0..3).map(|n| &mu[a][n] * &vd[n])).scale(&Scalar::from(2)),
            -sum((0..3).flat_map(|m| (0..3).map(move |n| (m, n))).map(|(m, n)| &mu[m][n] * &d(&d(&fd[m], n), a))),
        ];
        simplify(&sum(terms))
    })
}

pub fn divergence_equation(mu: &Tensor, xi: &[Expr; 3], eta: &Expr, f: &Expr, v: &Expr) -> Expr {
    let vd: [Expr; 3] = std::array::from_fn(|n| d(v, n));
    let terms = [
        sum((0..3).map(|n| d(&(f * &d(eta, n)), n))),
        sum((0..3).map(|n| &xi[n] * &vd[n])),
        sum((0..3).flat_map(|m| (0..3).map(move |n| (m, n))).map(|(m, n)| &mu[m][n] * &d(&vd[m], n))),
    ];
    simplify(&sum(terms))
}

pub fn full_residuals(mu: &Tensor, xi: &[Expr; 3], eta: &Expr, f: &Expr, v: &Expr) -> DeterminingResiduals {
    DeterminingResiduals {
        third_order: killing_residuals(mu),
        f_equation: f_equation(mu, f),
        first_order: first_order_equation(mu, xi, eta, f, v),
        second_order: second_order_equation(mu, xi, f),
        trace: trace_equation(mu, xi, f),
        divergence: divergence_equation(mu, xi, eta, f, v),
    }
}

/// The reduced system after `xi^a = mu^{ab}_b`: the f-equation and
/// `2(f eta_a + mu^ab V_b) + (mu^am_nm f - mu^nm f_am)_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedResiduals {
    pub f_equation: [Expr; 3],
    pub eta_equation: [Expr; 3],
}

impl ReducedResiduals {
    pub fn all(&self) -> Vec<Expr> {
        self.f_equation.iter().chain(&self.eta_equation).cloned().collect()
    }

    pub fn certificate(&self, policy: &Policy) -> Result<ZeroCertificate, ZeroError> {
        certify_all(&self.all(), policy)
    }
}

/// `(mu^am_mn f)_n - (mu^nm f_am)_m` summed; the non-potential part of the eta-equation.
fn eta_source(mu: &Tensor, f: &Expr) -> [Expr; 3] {
    let xi = divergence(mu);
    let fd: [Expr; 3] = std::array::from_fn(|n| d(f, n));
    std::array::from_fn(|a| {
        let p = sum((0..3).map(|n| d(&(&d(&xi[a], n) * f), n)));
        let q = sum((0..3).flat_map(|m| (0..3).map(move |n| (m, n))).map(|(m, n)| d(&(&mu[n][m] * &d(&fd[a], n)), m)));
        &p - &q
    })
}

pub fn reduced_residuals(mu: &Tensor, eta: &Expr, f: &Expr, v: &Expr) -> ReducedResiduals {
    let src = eta_source(mu, f);
    let vd: [Expr; 3] = std::array::from_fn(|n| d(v, n));
    let eta_equation = std::array::from_fn(|a| {
        let pot = &(f * &d(eta, a)) + &sum((0..3).map(|b| &mu[a][b] * &vd[b]));
        simplify(&(&pot.scale(&Scalar::from(2)) + &src[a]))
    });
    ReducedResiduals {
        f_equation: f_equation(mu, f),
        eta_equation,
    }
}

/// `d_a eta = W_a` as forced by the eta-equation, with the integrability residuals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EtaGradient {
    #[serde(serialize_with = "ser_exprs")]
    pub w: [Expr; 3],
    /// `d_1 W_2 - d_2 W_1`, `d_2 W_3 - d_3 W_2`, `d_3 W_1 - d_1 W_3`.
    #[serde(serialize_with = "ser_exprs")]
    pub curl: [Expr; 3],
}

fn ser_exprs<S: serde::Serializer>(v: &[Expr; 3], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(3))?;
    for e in v {
        seq.serialize_element(&e.to_string())?;
    }
    seq.end()
}

impl EtaGradient {
    pub fn curl_certificate(&self, policy: &Policy) -> Result<ZeroCertificate, ZeroError> {
        certify_all(&self.curl, policy)
    }

    /// `x_a W_a`; zero exactly when `eta` is homogeneous of degree zero.
    pub fn radial(&self) -> Expr {
        simplify(&sum((0..3).map(|a| &Expr::coord(a + 1) * &self.w[a])))
    }
}

pub fn curl(w: &[Expr; 3]) -> [Expr; 3] {
    let c = |a: usize, b: usize| simplify(&(&d(&w[b], a) - &d(&w[a], b)));
    [c(0, 1), c(1, 2), c(2, 0)]
}

/// `W_a = -(2 mu^ab V_b + (mu^am_mn f)_n - (mu^nm f_an)_m) / (2 f)`.
pub fn eta_gradient(mu: &Tensor, f: &Expr, v: &Expr) -> EtaGradient {
    let src = eta_source(mu, f);
    let vd: [Expr; 3] = std::array::from_fn(|n| d(v, n));
    let inv = (f.scale(&Scalar::from(-2))).recip();
    let w: [Expr; 3] = std::array::from_fn(|a| {
        let num = &sum((0..3).map(|b| &mu[a][b] * &vd[b])).scale(&Scalar::from(2)) + &src[a];
        simplify(&(&num * &inv))
    });
    let curl = curl(&w);
    EtaGradient { w, curl }
}

/// Building blocks of the default eta dictionary for homogeneity degree `deg`
/// in `-2..=0`; degrees 1 and 2 are obtained by inversion.
fn rational_blocks(deg: i32) -> Vec<Expr> {
    let x = Expr::coord;
    let dens: Vec<(Expr, i32)> = vec![
        (Expr::one(), 0),
        (Expr::r(), 1),
        (Expr::rt(), 1),
        (Expr::pow(&x(1), 2), 2),
        (Expr::pow(&x(2), 2), 2),
        (Expr::pow(&x(3), 2), 2),
        (Expr::r_squared(), 2),
        (Expr::rt_squared(), 2),
        (&Expr::rt() * &Expr::pow(&x(1), 2), 3),
        (&Expr::rt() * &Expr::pow(&x(2), 2), 3),
    ];
    let mut out = Vec::new();
    for (den, dd) in dens {
        let nd = deg + dd;
        if nd < 0 {
            continue;
        }
        for i in 0..=nd {
            for j in 0..=(nd - i) {
                let k = nd - i - j;
                let num = Expr::product([Expr::pow(&x(1), i as i64), Expr::pow(&x(2), j as i64), Expr::pow(&x(3), k as i64)]);
                out.push(simplify(&(&num / &den)));
            }
        }
    }
    out
}

/// Default dictionary for `eta` homogeneous of degree `deg` (`n - 2` for a
/// Killing tensor of degree `n`).
pub fn default_eta_dictionary(deg: i32) -> Vec<Expr> {
    let mut out = if deg <= 0 {
        rational_blocks(deg)
    } else {
        rational_blocks(-deg).iter().map(|e| simplify(&e.invert())).collect()
    };
    let exp = |k: i64| Expr::exp(Expr::phi().scale(&Scalar::from(k)));
    let x3 = Expr::coord(3);
    let rt = Expr::rt();
    let r2 = Expr::r_squared();
    match deg {
        0 => {
            out.push(Expr::ln(Expr::r()));
            out.push(Expr::phi());
            for s in [-1, 1] {
                out.push(&exp(s) * &(&x3 / &rt));
                out.push(&exp(2 * s) * &(&(&r2 + &Expr::pow(&x3, 2)) / &Expr::rt_squared()));
            }
        }
        -1 => {
            for s in [-1, 1] {
                out.push(&exp(s) / &rt);
                out.push(&exp(2 * s) * &(&x3 / &Expr::rt_squared()));
            }
        }
        1 => {
            for s in [-1, 1] {
                out.push(&exp(s) * &(&r2 / &rt));
                out.push(Expr::product([exp(2 * s), r2.clone(), x3.clone(), Expr::rt_squared().recip()]));
            }
        }
        _ => {}
    }
    let mut seen = BTreeSet::new();
    out.retain(|e| !e.as_const().is_some_and(|c| !c.is_one()) && seen.insert(e.clone()));
    out
}

/// Find `eta = sum_k c_k b_k` (with `b_k` ranging over the dictionary and its
/// products with every parameter of `w`) such that `grad eta = W`, then
/// certify the match. Returns `None` when no certified match exists.
pub fn recover_eta(w: &EtaGradient, dictionary: &[Expr], policy: &Policy) -> Option<Expr> {
    let params: BTreeSet<String> = w.w.iter().flat_map(|e| e.params()).collect();
    let mut basis: Vec<Expr> = dictionary.to_vec();
    for p in &params {
        basis.extend(dictionary.iter().map(|b| simplify(&(b * &Expr::param(p)))));
    }
    let grads: Vec<[Expr; 3]> = basis.iter().map(|b| std::array::from_fn(|a| simplify(&b.diff(a + 1)))).collect();
    let keep: Vec<usize> = (0..basis.len()).filter(|&k| grads[k].iter().any(|g| !g.is_zero())).collect();
    let n = keep.len();
    if w.w.iter().all(Expr::is_zero) {
        return Some(Expr::zero());
    }
    if n == 0 {
        return None;
    }
    let cells: Vec<Cell> = (0..3)
        .map(|a| (keep.iter().map(|&k| grads[k][a].clone()).collect(), w.w[a].clone()))
        .collect();
    let points = (2 * n).div_ceil(3) + 4;
    let rows = sample_rows(&cells, n, points, policy.seed ^ 0xe7a, true).ok()?;
    let coeffs = rows.solve(n)?;
    let eta = simplify(&Expr::sum(
        keep.iter().zip(&coeffs).filter(|(_, c)| !c.is_zero()).map(|(&k, c)| basis[k].scale(c)),
    ));
    let check: Vec<Expr> = (0..3).map(|a| simplify(&(&eta.diff(a + 1) - &w.w[a]))).collect();
    certify_all(&check, policy).ok()?.is_zero().then_some(eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffop::{expand_generators, DiffOp, Hamiltonian};
    use crate::lang::{parse_expr, parse_operator};

    fn e(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    fn identity_tensor() -> Tensor {
        std::array::from_fn(|a| std::array::from_fn(|b| Expr::int((a == b) as i64)))
    }

    fn zero3() -> [Expr; 3] {
        std::array::from_fn(|_| Expr::zero())
    }

    #[test]
    fn free_laplacian() {
        let r = full_residuals(&identity_tensor(), &zero3(), &Expr::zero(), &Expr::one(), &Expr::zero());
        assert!(r.all().iter().all(Expr::is_zero));
    }

    #[test]
    fn item_five_residuals_vanish() {
        let q = expand_generators(&parse_operator("P3^2 + 1/x3^2").unwrap()).unwrap();
        let form = q.to_selfadjoint_form().unwrap();
        let (mu, xi, eta) = (form.mu, q.first_order(), form.eta);
        for fslot in ["1", "sin(phi)"] {
            let bind: std::collections::BTreeMap<String, Expr> = [("F".to_string(), e(fslot))].into();
            let sub = |s: &str| e(s).subst_params(&bind);
            let f = sub("rt^2*F");
            let v = sub("rt^2/x3^2*F");
            let r = full_residuals(&mu, &xi, &eta, &f, &v);
            assert!(r.certificate(&Policy::default()).unwrap().is_zero(), "F = {fslot}");
            let bad = sub("rt^2/x3^3*F");
            let r = full_residuals(&mu, &xi, &eta, &f, &bad);
            assert!(!certify_all(&r.first_order, &Policy::default()).unwrap().is_zero());
        }
    }

    #[test]
    fn residuals_match_commutator() {
        let h = Hamiltonian::new(e("x3^2"), e("c*x3^2/x1^2"));
        let q = expand_generators(&parse_operator("{P1,K1} + 2*c*r^2/x1^2").unwrap()).unwrap();
        let form = q.to_selfadjoint_form().unwrap();
        let r = full_residuals(&form.mu, &q.first_order(), &form.eta, &h.f, &h.v);
        let comm: DiffOp = h.to_diffop().commutator(&q).unwrap();
        let policy = Policy::default();
        assert!(r.certificate(&policy).unwrap().is_zero());
        assert!(comm.zero_certificate(&policy).unwrap().is_zero());
        let q = expand_generators(&parse_operator("{P1,K1} + 4*c*r^2/x1^2").unwrap()).unwrap();
        let form = q.to_selfadjoint_form().unwrap();
        let r = full_residuals(&form.mu, &q.first_order(), &form.eta, &h.f, &h.v);
        assert!(!r.certificate(&policy).unwrap().is_zero());
        assert!(!h.to_diffop().commutator(&q).unwrap().zero_certificate(&policy).unwrap().is_zero());
    }

    #[test]
    fn linear_branch_gradient() {
        let q = expand_generators(&parse_operator("{P3,D}").unwrap()).unwrap();
        let mu = q.mu();
        let f = e("rt^2*sin(phi)");
        let policy = Policy::default();
        let g = eta_gradient(&mu, &f, &e("cos(phi) + c2*x3/r*sin(phi)"));
        assert!(g.curl_certificate(&policy).unwrap().is_zero());
        let eta = recover_eta(&g, &default_eta_dictionary(-1), &policy).unwrap();
        assert!(crate::zero::zero_certificate(&(&eta - &e("-c2/r")), &policy).unwrap().is_zero(), "{eta}");
        let h = Hamiltonian::new(f.clone(), e("cos(phi) + c2*x3/r*sin(phi)"));
        let q = expand_generators(&parse_operator("{P3,D} - c2/r").unwrap()).unwrap();
        assert!(h.to_diffop().commutator(&q).unwrap().zero_certificate(&policy).unwrap().is_zero());
        let g = eta_gradient(&mu, &f, &e("cos(phi) + c1*x3/rt*sin(phi)"));
        assert!(!g.curl_certificate(&policy).unwrap().is_zero());
    }

    #[test]
    fn constant_potential_forces_trivial_branch() {
        // all of a, lambda3, d nonzero with a nonconstant V: not integrable
        let mu = expand_generators(&parse_operator("{P3,D} + {P1,L2}").unwrap()).unwrap().mu();
        let g = eta_gradient(&mu, &e("x2^2"), &e("x1/x3"));
        assert!(!g.curl_certificate(&Policy::default()).unwrap().is_zero());
    }

    #[test]
    fn flat_gradient_sign() {
        let g = eta_gradient(&identity_tensor(), &Expr::one(), &e("x1"));
        assert!((&g.w[0] + &Expr::one()).is_zero());
        let eta = recover_eta(&g, &[e("x1"), e("x2")], &Policy::default()).unwrap();
        assert!((&eta + &e("x1")).is_zero());
    }

    #[test]
    fn logarithm_recovered() {
        let w: [Expr; 3] =
            std::array::from_fn(|a| simplify(&(&(&Expr::coord(a + 1) / &Expr::r_squared()).scale(&Scalar::from(-2)) * &Expr::param("c"))));
        let g = EtaGradient { curl: curl(&w), w };
        let eta = recover_eta(&g, &default_eta_dictionary(0), &Policy::default()).unwrap();
        let want = e("-2*c*ln(r)");
        assert!(crate::zero::zero_certificate(&(&eta - &want), &Policy::default()).unwrap().is_zero(), "{eta}");
    }

    #[test]
    fn exponential_not_representable() {
        let w: [Expr; 3] = std::array::from_fn(|a| simplify(&Expr::exp(Expr::r()).diff(a + 1)));
        let g = EtaGradient { curl: curl(&w), w };
        assert!(recover_eta(&g, &default_eta_dictionary(0), &Policy::default()).is_none());
    }
}
