//! Conformal Killing tensors, the M-matrices of the linear and bilinear
//! branches, and the determinant branch conditions.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::expr::Expr;
use crate::normal::simplify;
use crate::scalar::Scalar;
use crate::zero::{certify_all, Policy, ZeroCertificate, ZeroError};

/// Symmetric 3x3 tensor, zero-based indices.
pub type Tensor = [[Expr; 3]; 3];

#[derive(Debug, Clone, Error, PartialEq)]
pub enum KillingError {
    #[error("unknown Killing family {0}; expected 1..=9")]
    UnknownFamily(u8),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("family {0} fails the Killing identity")]
    NotKilling(u8),
    #[error(transparent)]
    Zero(#[from] ZeroError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum KillingTag {
    Family(u8),
    /// Canonical homogeneous forms of degree 0, 1, 2.
    Canonical(u8),
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KillingTensor {
    pub mu: Tensor,
    pub tag: KillingTag,
    pub params: BTreeMap<String, Scalar>,
}

pub fn levi(a: usize, b: usize, c: usize) -> i64 {
    match (a, b, c) {
        (1, 2, 3) | (2, 3, 1) | (3, 1, 2) => 1,
        (3, 2, 1) | (1, 3, 2) | (2, 1, 3) => -1,
        _ => 0,
    }
}

fn delta(a: usize, b: usize) -> i64 {
    (a == b) as i64
}

fn x(a: usize) -> Expr {
    Expr::coord(a)
}

fn p(name: &str) -> Expr {
    Expr::param(name)
}

fn sym_name(base: &str, a: usize, b: usize) -> String {
    let (i, j) = if a <= b { (a, b) } else { (b, a) };
    format!("{base}_{i}{j}")
}

/// Symmetric matrix of parameters `base_ij`.
fn sym_params(base: &str) -> [[Expr; 3]; 3] {
    std::array::from_fn(|a| std::array::from_fn(|b| p(&sym_name(base, a + 1, b + 1))))
}

fn vec_params(base: &str) -> [Expr; 3] {
    std::array::from_fn(|a| p(&format!("{base}_{}", a + 1)))
}

fn sym_names(base: &str) -> Vec<String> {
    let mut v = Vec::new();
    for a in 1..=3 {
        for b in a..=3 {
            v.push(sym_name(base, a, b));
        }
    }
    v
}

fn vec_names(base: &str) -> Vec<String> {
    (1..=3).map(|a| format!("{base}_{a}")).collect()
}

fn tensor(f: impl Fn(usize, usize) -> Expr) -> Tensor {
    std::array::from_fn(|a| std::array::from_fn(|b| simplify(&f(a + 1, b + 1))))
}

/// `lam^{cd} x^c x^d`.
fn quad(lam: &[[Expr; 3]; 3]) -> Expr {
    let mut terms = Vec::new();
    for c in 1..=3 {
        for d in 1..=3 {
            terms.push(Expr::product([lam[c - 1][d - 1].clone(), x(c), x(d)]));
        }
    }
    Expr::sum(terms)
}

fn dot(lam: &[Expr; 3]) -> Expr {
    Expr::sum((1..=3).map(|c| &lam[c - 1] * &x(c)))
}

/// Parameter names of family `n`, in a fixed order.
pub fn family_params(n: u8) -> Result<Vec<String>, KillingError> {
    let mut v = match n {
        1 => [sym_names("l1"), vec!["w1".into()]].concat(),
        2 => [vec_names("l2"), vec_names("t2"), vec!["w2".into()]].concat(),
        3 => sym_names("l3"),
        4 => vec_names("l4"),
        5 => vec!["w5".into(), "k5".into()],
        6 => [sym_names("l5"), sym_names("l6"), vec!["w6".into()]].concat(),
        7 => [vec_names("l7"), vec_names("t7"), vec!["w7".into()]].concat(),
        8 => sym_names("l8"),
        9 => [sym_names("l9"), sym_names("l10"), vec!["k9".into(), "w9".into()]].concat(),
        _ => return Err(KillingError::UnknownFamily(n)),
    };
    v.sort();
    Ok(v)
}

/// Polynomial degree of family `n` (degree 0 for the rational family 1).
pub fn family_degree(n: u8) -> Result<u32, KillingError> {
    Ok(match n {
        1 => 0,
        2 | 3 => 1,
        4..=6 => 2,
        7 | 8 => 3,
        9 => 4,
        _ => return Err(KillingError::UnknownFamily(n)),
    })
}

/// Family `n` with every parameter symbolic and the radial functions taken constant.
pub fn family_symbolic(n: u8) -> Result<Tensor, KillingError> {
    let r2 = Expr::r_squared();
    Ok(match n {
        1 => {
            let l = sym_params("l1");
            let trace = &(&p("w1") * &quad(&l)) / &r2;
            tensor(|a, b| &l[a - 1][b - 1] + &(&Expr::int(delta(a, b)) * &trace))
        }
        2 => {
            let l = vec_params("l2");
            let t = dot(&vec_params("t2"));
            tensor(|a, b| {
                Expr::sum([
                    &l[a - 1] * &x(b),
                    &l[b - 1] * &x(a),
                    Expr::product([Expr::int(delta(a, b)), p("w2"), t.clone()]),
                ])
            })
        }
        3 => {
            let l = sym_params("l3");
            tensor(|a, b| {
                let mut terms = Vec::new();
                for c in 1..=3 {
                    for d in 1..=3 {
                        let e1 = levi(a, c, d);
                        let e2 = levi(b, c, d);
                        if e1 != 0 {
                            terms.push(Expr::product([Expr::int(e1), l[c - 1][b - 1].clone(), x(d)]));
                        }
                        if e2 != 0 {
                            terms.push(Expr::product([Expr::int(e2), l[c - 1][a - 1].clone(), x(d)]));
                        }
                    }
                }
                Expr::sum(terms)
            })
        }
        4 => {
            let l = vec_params("l4");
            tensor(|a, b| {
                let mut terms = Vec::new();
                for c in 1..=3 {
                    for d in 1..=3 {
                        let eb = levi(b, c, d);
                        let ea = levi(a, c, d);
                        if eb != 0 {
                            terms.push(Expr::product([Expr::int(eb), x(a), x(c), l[d - 1].clone()]));
                        }
                        if ea != 0 {
                            terms.push(Expr::product([Expr::int(ea), x(b), x(c), l[d - 1].clone()]));
                        }
                    }
                }
                Expr::sum(terms)
            })
        }
        5 => tensor(|a, b| {
            let d = Expr::int(delta(a, b));
            Expr::sum([
                Expr::product([d.clone(), r2.clone(), p("w5")]),
                &p("k5") * &(&(&x(a) * &x(b)) - &(&d * &r2)),
            ])
        }),
        6 => {
            let l = sym_params("l5");
            let t = quad(&sym_params("l6"));
            tensor(|a, b| {
                let mut terms = vec![&l[a - 1][b - 1] * &r2];
                for c in 1..=3 {
                    terms.push(-Expr::product([x(a), l[b - 1][c - 1].clone(), x(c)]));
                    terms.push(-Expr::product([x(b), l[a - 1][c - 1].clone(), x(c)]));
                }
                terms.push(Expr::product([Expr::int(delta(a, b)), t.clone(), p("w6")]));
                Expr::sum(terms)
            })
        }
        7 => {
            let l = vec_params("l7");
            let lx = dot(&l);
            let t = dot(&vec_params("t7"));
            tensor(|a, b| {
                Expr::sum([
                    &(&(&x(a) * &l[b - 1]) + &(&x(b) * &l[a - 1])) * &r2,
                    Expr::product([Expr::int(-4), x(a), x(b), lx.clone()]),
                    Expr::product([Expr::int(delta(a, b)), t.clone(), r2.clone(), p("w7")]),
                ])
            })
        }
        8 => {
            let l = sym_params("l8");
            tensor(|a, b| {
                let mut terms = Vec::new();
                for c in 1..=3 {
                    for d in 1..=3 {
                        let eb = levi(b, c, d);
                        let ea = levi(a, c, d);
                        for n in 1..=3 {
                            if eb != 0 {
                                terms.push(Expr::product([Expr::int(2 * eb), x(a), l[d - 1][n - 1].clone(), x(c), x(n)]));
                            }
                            if ea != 0 {
                                terms.push(Expr::product([Expr::int(2 * ea), x(b), l[d - 1][n - 1].clone(), x(c), x(n)]));
                            }
                        }
                    }
                }
                for c in 1..=3 {
                    for k in 1..=3 {
                        let e1 = levi(a, c, k);
                        let e2 = levi(b, c, k);
                        if e1 != 0 {
                            terms.push(Expr::product([Expr::int(-e1), l[b - 1][k - 1].clone(), x(c), r2.clone()]));
                        }
                        if e2 != 0 {
                            terms.push(Expr::product([Expr::int(-e2), l[a - 1][k - 1].clone(), x(c), r2.clone()]));
                        }
                    }
                }
                Expr::sum(terms)
            })
        }
        9 => {
            let l = sym_params("l9");
            let q = quad(&l);
            let t = quad(&sym_params("l10"));
            let r4 = Expr::pow(&r2, 2);
            tensor(|a, b| {
                let mut terms = vec![&l[a - 1][b - 1] * &r4];
                for c in 1..=3 {
                    terms.push(Expr::product([Expr::int(-2), x(a), l[b - 1][c - 1].clone(), x(c), r2.clone()]));
                    terms.push(Expr::product([Expr::int(-2), x(b), l[a - 1][c - 1].clone(), x(c), r2.clone()]));
                }
                let inner = &Expr::product([Expr::int(4), x(a), x(b)])
                    + &Expr::product([p("k9"), Expr::int(delta(a, b)), r2.clone()]);
                terms.push(&inner * &q);
                terms.push(Expr::product([Expr::int(delta(a, b)), t.clone(), r2.clone(), p("w9")]));
                Expr::sum(terms)
            })
        }
        _ => return Err(KillingError::UnknownFamily(n)),
    })
}

/// Family 6 exactly as typeset, with `x^2 lam^{bc} x^c` in the second term.
pub fn family_six_as_printed() -> Tensor {
    let l = sym_params("l5");
    let r2 = Expr::r_squared();
    tensor(|a, b| {
        let mut terms = vec![&l[a - 1][b - 1] * &r2];
        for c in 1..=3 {
            terms.push(-Expr::product([r2.clone(), l[b - 1][c - 1].clone(), x(c)]));
            terms.push(-Expr::product([x(b), l[a - 1][c - 1].clone(), x(c)]));
        }
        Expr::sum(terms)
    })
}

pub fn bind_tensor(mu: &Tensor, values: &BTreeMap<String, Scalar>) -> Tensor {
    std::array::from_fn(|a| std::array::from_fn(|b| simplify(&mu[a][b].bind(values))))
}

/// Family `n` with the given parameters; missing parameters are zero.
/// The result is certified against the Killing identity.
pub fn killing_family(n: u8, params: &BTreeMap<String, Scalar>, policy: &Policy) -> Result<KillingTensor, KillingError> {
    let names = family_params(n)?;
    if let Some(bad) = params.keys().find(|k| !names.contains(k)) {
        return Err(KillingError::UnknownParam(bad.clone()));
    }
    let mut full: BTreeMap<String, Scalar> = names.iter().map(|k| (k.clone(), Scalar::zero())).collect();
    full.extend(params.iter().map(|(k, v)| (k.clone(), v.clone())));
    let mu = bind_tensor(&family_symbolic(n)?, &full);
    if !check_killing_identity(&mu, policy)?.is_zero() {
        return Err(KillingError::NotKilling(n));
    }
    Ok(KillingTensor {
        mu,
        tag: KillingTag::Family(n),
        params: params.clone(),
    })
}

/// `mu^{nn}_c + 2 mu^{cn}_n`, zero-based `c`.
pub fn trace_vector(mu: &Tensor) -> [Expr; 3] {
    std::array::from_fn(|c| {
        let tr = Expr::sum((0..3).map(|n| mu[n][n].diff(c + 1)));
        let div = Expr::sum((0..3).map(|n| mu[c][n].diff(n + 1)));
        &tr + &(&Expr::int(2) * &div)
    })
}

/// Index triples `a <= b <= c` (one-based) of the independent identity components.
pub fn identity_components() -> Vec<[usize; 3]> {
    let mut v = Vec::new();
    for a in 1..=3 {
        for b in a..=3 {
            for c in b..=3 {
                v.push([a, b, c]);
            }
        }
    }
    v
}

/// Residuals `5(mu^ab_c + mu^ac_b + mu^bc_a) - delta^ab T_c - delta^bc T_a - delta^ac T_b`.
pub fn killing_residuals(mu: &Tensor) -> Vec<Expr> {
    let t = trace_vector(mu);
    identity_components()
        .into_iter()
        .map(|[a, b, c]| {
            let m = |i: usize, j: usize| &mu[i - 1][j - 1];
            let lhs = Expr::sum([m(a, b).diff(c), m(a, c).diff(b), m(b, c).diff(a)]).scale(&Scalar::from(5));
            let rhs = Expr::sum([
                &Expr::int(delta(a, b)) * &t[c - 1],
                &Expr::int(delta(b, c)) * &t[a - 1],
                &Expr::int(delta(a, c)) * &t[b - 1],
            ]);
            simplify(&(&lhs - &rhs))
        })
        .collect()
}

pub fn check_killing_identity(mu: &Tensor, policy: &Policy) -> Result<ZeroCertificate, ZeroError> {
    certify_all(&killing_residuals(mu), policy)
}

/// Canonical forms of degree 0, 1 and 2 used after the inversion reduction.
pub fn canonical_form(degree: u8) -> Option<Tensor> {
    let r2 = Expr::r_squared();
    match degree {
        0 => {
            let l = sym_params("lam");
            let t = &(&p("kappa") * &quad(&sym_params("lamt"))) / &r2;
            Some(tensor(|a, b| &l[a - 1][b - 1] + &(&Expr::int(delta(a, b)) * &t)))
        }
        1 => {
            let l = vec_params("lam");
            let m = vec_params("mu");
            let lt = dot(&vec_params("lamt"));
            let ls = sym_params("lam");
            Some(tensor(|a, b| {
                let mut terms = vec![
                    &l[a - 1] * &x(b),
                    &l[b - 1] * &x(a),
                    Expr::product([Expr::int(-2 * delta(a, b)), lt.clone()]),
                    &m[a - 1] * &x(b),
                    &m[b - 1] * &x(a),
                ];
                for c in 1..=3 {
                    for d in 1..=3 {
                        let e1 = levi(a, c, d);
                        let e2 = levi(b, c, d);
                        if e1 != 0 {
                            terms.push(Expr::product([Expr::int(e1), ls[c - 1][b - 1].clone(), x(d)]));
                        }
                        if e2 != 0 {
                            terms.push(Expr::product([Expr::int(e2), ls[c - 1][a - 1].clone(), x(d)]));
                        }
                    }
                }
                Expr::sum(terms)
            }))
        }
        2 => {
            let l = vec_params("lam");
            let ls = sym_params("lam");
            let t = quad(&sym_params("lamt"));
            Some(tensor(|a, b| {
                let mut terms = vec![
                    Expr::product([p("kappa"), x(a), x(b)]),
                    Expr::product([Expr::int(delta(a, b)), t.clone()]),
                    &ls[a - 1][b - 1] * &r2,
                ];
                for c in 1..=3 {
                    for d in 1..=3 {
                        let eb = levi(b, c, d);
                        let ea = levi(a, c, d);
                        if eb != 0 {
                            terms.push(Expr::product([Expr::int(eb), x(a), l[d - 1].clone(), x(c)]));
                        }
                        if ea != 0 {
                            terms.push(Expr::product([Expr::int(ea), x(b), l[d - 1].clone(), x(c)]));
                        }
                    }
                    terms.push(-Expr::product([x(a), ls[b - 1][c - 1].clone(), x(c)]));
                    terms.push(-Expr::product([x(b), ls[a - 1][c - 1].clone(), x(c)]));
                }
                Expr::sum(terms)
            }))
        }
        _ => None,
    }
}

/// `M^{ab}` with the f-equation `(mu^nn_a + 2 mu^na_n) f - 5 mu^an f_n = 0`
/// rewritten through Euler's identity `2f = x_b f_b` as `M^{ab} f_b = 0`.
pub fn derived_m_matrix(mu: &Tensor) -> [[Expr; 3]; 3] {
    let t = trace_vector(mu);
    let tenth = Scalar::ratio(1, 10);
    std::array::from_fn(|a| {
        std::array::from_fn(|b| simplify(&(&mu[a][b] - &(&t[a] * &x(b + 1)).scale(&tenth))))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Branch {
    Linear,
    Bilinear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MMatrix {
    pub m: [[Expr; 3]; 3],
    pub branch: Branch,
}

impl MMatrix {
    pub fn det(&self) -> Expr {
        det3(&self.m)
    }
}

/// Cofactor expansion followed by normal form.
pub fn det3(m: &[[Expr; 3]; 3]) -> Expr {
    let minor = |i: usize, j: usize, k: usize, l: usize| &(&m[i][k] * &m[j][l]) - &(&m[i][l] * &m[j][k]);
    let d = Expr::sum([
        &m[0][0] * &minor(1, 2, 1, 2),
        -(&m[0][1] * &minor(1, 2, 0, 2)),
        &m[0][2] * &minor(1, 2, 0, 1),
    ]);
    simplify(&d)
}

pub const LINEAR_PARAMS: [&str; 8] = ["a", "b", "c", "d1", "d2", "lambda1", "lambda2", "lambda3"];

/// Gauge-reduced linear-branch matrix with `d3 = -d1 - d2`.
fn linear_matrix(v: &dyn Fn(&str) -> Expr) -> [[Expr; 3]; 3] {
    let (a, b, c) = (v("a"), v("b"), v("c"));
    let (d1, d2) = (v("d1"), v("d2"));
    let d3 = -(&d1 + &d2);
    let (l1, l2, l3) = (v("lambda1"), v("lambda2"), v("lambda3"));
    let e = |terms: Vec<Expr>| simplify(&Expr::sum(terms));
    [
        [
            e(vec![Expr::product([Expr::int(-2), c.clone(), x(3)]), &l1 * &x(1)]),
            e(vec![&l2 * &x(1), &d3 * &x(3)]),
            e(vec![&a * &x(3), &d2 * &x(2), &l3 * &x(1)]),
        ],
        [
            e(vec![&l1 * &x(2), &d3 * &x(3)]),
            e(vec![&l2 * &x(2)]),
            e(vec![&d1 * &x(1), &l3 * &x(2), &b * &x(3)]),
        ],
        [
            e(vec![&c * &x(1), &d2 * &x(2), &(&a + &l1) * &x(3)]),
            e(vec![&(&b + &l2) * &x(3), &d1 * &x(1)]),
            e(vec![&l3 * &x(3), Expr::product([Expr::int(-2), a.clone(), x(1)]), Expr::product([Expr::int(-2), b.clone(), x(2)])]),
        ],
    ]
}

/// Printed nonzero entries `N^{ab}_{cd}` as `(c, d, entry)`, one-based.
fn n_entries(ab: (usize, usize)) -> Option<Vec<(usize, usize, Expr)>> {
    let xx = |i: usize, j: usize| &x(i) * &x(j);
    let r2 = Expr::r_squared();
    Some(match ab {
        (1, 1) => vec![(1, 2, -xx(1, 2)), (1, 3, -xx(1, 3)), (2, 2, xx(1, 1)), (3, 3, xx(1, 1))],
        (2, 2) => vec![(1, 1, xx(2, 2)), (3, 3, xx(2, 2)), (2, 1, -xx(2, 1)), (2, 3, -xx(2, 3))],
        (3, 3) => vec![(3, 1, -xx(3, 1)), (3, 2, -xx(3, 2)), (3, 3, Expr::rt_squared())],
        (1, 2) => vec![
            (1, 1, xx(1, 2).scale(&Scalar::from(-2))),
            (1, 2, r2.clone()),
            (2, 1, &r2 - &xx(2, 2).scale(&Scalar::from(2))),
            (3, 1, xx(2, 3).scale(&Scalar::from(-2))),
        ],
        (2, 1) => vec![
            (1, 2, &r2 - &xx(1, 1).scale(&Scalar::from(2))),
            (2, 1, r2.clone()),
            (2, 2, xx(1, 2).scale(&Scalar::from(-2))),
            (3, 2, xx(1, 2).scale(&Scalar::from(-2))),
        ],
        _ => return None,
    })
}

/// Relabel axes by the cycle 1 -> 2 -> 3 -> 1.
fn cycle_axis(a: usize) -> usize {
    a % 3 + 1
}

/// The basis matrix `N^{ab}`. `N^{23}` and `N^{32}` are not typeset; they are
/// obtained from `N^{12}` and `N^{21}` by cyclic relabelling of the axes.
pub fn n_matrix(a: usize, b: usize) -> Option<[[Expr; 3]; 3]> {
    let (entries, relabel) = match (a, b) {
        (2, 3) => (n_entries((1, 2))?, true),
        (3, 2) => (n_entries((2, 1))?, true),
        _ => (n_entries((a, b))?, false),
    };
    let mut m: [[Expr; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| Expr::zero()));
    for (c, d, e) in entries {
        if relabel {
            let sub = |n: &crate::expr::Node| match n {
                crate::expr::Node::Coord(k) => Some(x(cycle_axis(*k as usize))),
                _ => None,
            };
            let e = e.map_leaves(&sub);
            m[cycle_axis(c) - 1][cycle_axis(d) - 1] = simplify(&e);
        } else {
            m[c - 1][d - 1] = e;
        }
    }
    Some(m)
}

/// `x_a x_b I`.
pub fn n_tilde(a: usize, b: usize) -> [[Expr; 3]; 3] {
    let v = &x(a) * &x(b);
    std::array::from_fn(|i| std::array::from_fn(|j| if i == j { v.clone() } else { Expr::zero() }))
}

fn mat_add(acc: &mut [[Expr; 3]; 3], m: &[[Expr; 3]; 3], c: &Expr) {
    for i in 0..3 {
        for j in 0..3 {
            acc[i][j] = &acc[i][j] + &(c * &m[i][j]);
        }
    }
}

fn zero_mat() -> [[Expr; 3]; 3] {
    std::array::from_fn(|_| std::array::from_fn(|_| Expr::zero()))
}

fn simplify_mat(m: [[Expr; 3]; 3]) -> [[Expr; 3]; 3] {
    m.map(|row| row.map(|e| simplify(&e)))
}

/// The five inequivalent bilinear combinations, indexed 1..=5.
pub fn canonical_n_combination(k: u8, v: &dyn Fn(&str) -> Expr) -> Option<[[Expr; 3]; 3]> {
    let n = |a, b| n_matrix(a, b).expect("defined basis matrix");
    let mut acc = zero_mat();
    let mut put = |terms: Vec<(&str, Vec<(usize, usize, i64)>)>| {
        for (name, mats) in terms {
            let coeff = v(name);
            for (a, b, s) in mats {
                mat_add(&mut acc, &n(a, b), &(&coeff * &Expr::int(s)));
            }
        }
    };
    match k {
        1 => put(vec![("nu1", vec![(1, 1, 1)]), ("nu2", vec![(2, 2, 1)]), ("nu3", vec![(3, 3, 1)])]),
        2 => put(vec![("nu4", vec![(1, 1, 1), (2, 2, 1)]), ("nu5", vec![(3, 3, 1)]), ("nu6", vec![(1, 2, 1)])]),
        3 => put(vec![("nu7", vec![(1, 1, 1), (2, 2, 1), (3, 3, 1)]), ("nu8", vec![(1, 2, 1)]), ("nu9", vec![(2, 3, 1)])]),
        4 => put(vec![("nu10", vec![(1, 1, 1), (2, 2, 1)]), ("nu11", vec![(3, 3, 1)]), ("nu12", vec![(1, 2, 1), (2, 1, -1)])]),
        5 => put(vec![
            ("nu13", vec![(1, 1, 1), (2, 2, 1), (3, 3, 1)]),
            ("nu14", vec![(1, 2, 1), (2, 1, -1)]),
            ("nu15", vec![(2, 3, 1), (3, 2, -1)]),
        ]),
        _ => return None,
    }
    Some(simplify_mat(acc))
}

/// Parameters of canonical combination `k`.
pub fn combination_params(k: u8) -> Vec<String> {
    if !(1..=5).contains(&k) {
        return Vec::new();
    }
    let first = 3 * (k - 1) + 1;
    (first..first + 3).map(|i| format!("nu{i}")).collect()
}

/// `M` derived from the tensor of `{K_a, P_b}` through [`derived_m_matrix`].
pub fn derived_n_matrix(a: usize, b: usize) -> Option<[[Expr; 3]; 3]> {
    use crate::diffop::{expand_generators, Generator, GeneratorExpr};
    if !(1..=3).contains(&a) || !(1..=3).contains(&b) {
        return None;
    }
    let q = GeneratorExpr::anti(GeneratorExpr::Gen(Generator::K(a as u8)), GeneratorExpr::Gen(Generator::P(b as u8)));
    let op = expand_generators(&q).ok()?;
    Some(derived_m_matrix(&op.mu()))
}

/// Same combinations as [`canonical_n_combination`] over the derived basis.
pub fn derived_n_combination(k: u8, v: &dyn Fn(&str) -> Expr) -> Option<[[Expr; 3]; 3]> {
    let n = |a, b| derived_n_matrix(a, b).expect("indices in range");
    let mats: Vec<(&str, Vec<(usize, usize, i64)>)> = match k {
        1 => vec![("nu1", vec![(1, 1, 1)]), ("nu2", vec![(2, 2, 1)]), ("nu3", vec![(3, 3, 1)])],
        2 => vec![("nu4", vec![(1, 1, 1), (2, 2, 1)]), ("nu5", vec![(3, 3, 1)]), ("nu6", vec![(1, 2, 1)])],
        3 => vec![("nu7", vec![(1, 1, 1), (2, 2, 1), (3, 3, 1)]), ("nu8", vec![(1, 2, 1)]), ("nu9", vec![(2, 3, 1)])],
        4 => vec![("nu10", vec![(1, 1, 1), (2, 2, 1)]), ("nu11", vec![(3, 3, 1)]), ("nu12", vec![(1, 2, 1), (2, 1, -1)])],
        5 => vec![
            ("nu13", vec![(1, 1, 1), (2, 2, 1), (3, 3, 1)]),
            ("nu14", vec![(1, 2, 1), (2, 1, -1)]),
            ("nu15", vec![(2, 3, 1), (3, 2, -1)]),
        ],
        _ => return None,
    };
    let mut acc = zero_mat();
    for (name, list) in mats {
        let coeff = v(name);
        for (a, b, s) in list {
            mat_add(&mut acc, &n(a, b), &(&coeff * &Expr::int(s)));
        }
    }
    Some(simplify_mat(acc))
}

/// The matrix typeset for `Q = {K1,P1} + mu {K2,P2} + nu L3^2`.
pub fn bilinear_worked_matrix(v: &dyn Fn(&str) -> Expr) -> [[Expr; 3]; 3] {
    let (mu, nu) = (v("mu"), v("nu"));
    let one = Expr::one();
    let two = Expr::int(2);
    let mut m = zero_mat();
    m[0][0] = &two * &(&Expr::pow(&x(3), 2) + &(&(&one + &nu) * &Expr::pow(&x(2), 2)));
    m[0][1] = Expr::product([Expr::int(-2), &mu + &nu, x(1), x(2)]);
    m[1][0] = Expr::product([Expr::int(-2), &one + &nu, x(1), x(2)]);
    m[1][1] = &Expr::product([two.clone(), &mu + &nu, Expr::pow(&x(1), 2)]) + &(&mu * &Expr::pow(&x(3), 2));
    m[0][2] = Expr::product([Expr::int(-2), x(1), x(3)]);
    m[1][2] = Expr::product([Expr::int(-2), mu, x(2), x(3)]);
    simplify_mat(m)
}

/// Linear-branch or bilinear M-matrix; `params` names are checked against
/// the branch's coefficient set and unspecified ones stay symbolic.
pub fn build_m_matrix(branch: Branch, combination: Option<u8>, params: &BTreeMap<String, Expr>) -> Result<MMatrix, KillingError> {
    let allowed: Vec<String> = match branch {
        Branch::Linear => LINEAR_PARAMS.iter().map(|s| s.to_string()).collect(),
        Branch::Bilinear => {
            let mut v: Vec<String> = (1..=15).map(|i| format!("nu{i}")).collect();
            for a in 1..=3 {
                for b in a..=3 {
                    v.push(format!("nut_{a}{b}"));
                }
            }
            v.extend(["mu".to_string(), "nu".to_string()]);
            v
        }
    };
    if let Some(bad) = params.keys().find(|k| !allowed.contains(k)) {
        return Err(KillingError::UnknownParam(bad.clone()));
    }
    let v = |name: &str| params.get(name).cloned().unwrap_or_else(|| p(name));
    let m = match branch {
        Branch::Linear => linear_matrix(&v),
        Branch::Bilinear => {
            let mut acc = match combination {
                Some(k) => canonical_n_combination(k, &v).ok_or(KillingError::UnknownFamily(k))?,
                None => bilinear_worked_matrix(&v),
            };
            for a in 1..=3 {
                for b in a..=3 {
                    let name = format!("nut_{a}{b}");
                    if let Some(c) = params.get(&name) {
                        mat_add(&mut acc, &n_tilde(a, b), c);
                    }
                }
            }
            simplify_mat(acc)
        }
    };
    Ok(MMatrix { m, branch })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BranchCondition {
    /// `a = b = c = d_a = 0`.
    AllOffZero,
    /// `d1 = -d2, c = 0, lambda1 = lambda2 = 0`.
    OppositeD,
    /// `a d2 = -b c, b lambda1 = -2 lambda3`.
    MixedProducts,
    /// `b lambda1 = a lambda2, c = 0`.
    ProportionalLambda,
    /// `a = b = d_a = lambda2 = 0`.
    OnlyCLambda13,
    /// `lambda1 d1 = -c lambda2, d1 lambda3 = -a lambda2, b = 0`.
    DLambda,
    /// Bilinear canonical combination `k` in 1..=5 over the typeset `N`.
    Combination(u8),
    /// Combination `k` over the `N` derived from `{K_a, P_b}`.
    DerivedCombination(u8),
    /// Combination 4 with `nu11 = 0`.
    WorkedCase,
    /// The matrix of `{K1,P1} + mu {K2,P2} + nu L3^2`.
    ThreeTerm,
    /// No constraint at all.
    Generic(Branch),
}

impl BranchCondition {
    pub fn linear() -> [BranchCondition; 6] {
        use BranchCondition::*;
        [AllOffZero, OppositeD, MixedProducts, ProportionalLambda, OnlyCLambda13, DLambda]
    }

    pub fn bilinear() -> Vec<BranchCondition> {
        let mut v: Vec<BranchCondition> = (1..=5).map(BranchCondition::Combination).collect();
        v.push(BranchCondition::WorkedCase);
        v.push(BranchCondition::ThreeTerm);
        v
    }

    pub fn branch(self) -> Branch {
        match self {
            BranchCondition::Combination(_)
            | BranchCondition::DerivedCombination(_)
            | BranchCondition::WorkedCase
            | BranchCondition::ThreeTerm => Branch::Bilinear,
            BranchCondition::Generic(b) => b,
            _ => Branch::Linear,
        }
    }

    /// Constraints as substitutions, solved for one parameter each.
    pub fn substitutions(self) -> BTreeMap<String, Expr> {
        let z = Expr::zero;
        let pv = |s: &str| p(s);
        let mut m = BTreeMap::new();
        let mut set = |k: &str, v: Expr| {
            m.insert(k.to_string(), v);
        };
        match self {
            BranchCondition::AllOffZero => {
                for k in ["a", "b", "c", "d1", "d2"] {
                    set(k, z());
                }
            }
            BranchCondition::OppositeD => {
                set("d1", -pv("d2"));
                set("c", z());
                set("lambda1", z());
                set("lambda2", z());
            }
            BranchCondition::MixedProducts => {
                set("d2", -(&(&pv("b") * &pv("c")) / &pv("a")));
                set("lambda3", (&pv("b") * &pv("lambda1")).scale(&Scalar::ratio(-1, 2)));
            }
            BranchCondition::ProportionalLambda => {
                set("lambda2", &(&pv("b") * &pv("lambda1")) / &pv("a"));
                set("c", z());
            }
            BranchCondition::OnlyCLambda13 => {
                for k in ["a", "b", "d1", "d2", "lambda2"] {
                    set(k, z());
                }
            }
            BranchCondition::DLambda => {
                set("c", -(&(&pv("lambda1") * &pv("d1")) / &pv("lambda2")));
                set("a", -(&(&pv("d1") * &pv("lambda3")) / &pv("lambda2")));
                set("b", z());
            }
            BranchCondition::WorkedCase => set("nu11", z()),
            BranchCondition::Combination(_)
            | BranchCondition::DerivedCombination(_)
            | BranchCondition::ThreeTerm
            | BranchCondition::Generic(_) => {}
        }
        m
    }

    pub fn matrix(self) -> MMatrix {
        let subs = self.substitutions();
        let v = |name: &str| subs.get(name).cloned().unwrap_or_else(|| p(name));
        let m = match self {
            BranchCondition::Combination(k) => canonical_n_combination(k, &v).expect("k in 1..=5"),
            BranchCondition::DerivedCombination(k) => derived_n_combination(k, &v).expect("k in 1..=5"),
            BranchCondition::WorkedCase => canonical_n_combination(4, &v).expect("combination 4"),
            BranchCondition::ThreeTerm => bilinear_worked_matrix(&v),
            BranchCondition::Generic(Branch::Bilinear) => {
                let mut acc = zero_mat();
                for k in 1..=5u8 {
                    let c = canonical_n_combination(k, &v).expect("k in 1..=5");
                    mat_add(&mut acc, &c, &Expr::one());
                }
                simplify_mat(acc)
            }
            _ => linear_matrix(&v),
        };
        MMatrix { m, branch: self.branch() }
    }
}

impl fmt::Display for BranchCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BranchCondition::AllOffZero => f.write_str("a=b=c=d_a=0"),
            BranchCondition::OppositeD => f.write_str("d1=-d2, c=0, lambda1=lambda2=0"),
            BranchCondition::MixedProducts => f.write_str("a*d2=-b*c, b*lambda1=-2*lambda3"),
            BranchCondition::ProportionalLambda => f.write_str("b*lambda1=a*lambda2, c=0"),
            BranchCondition::OnlyCLambda13 => f.write_str("a=b=d_a=lambda2=0"),
            BranchCondition::DLambda => f.write_str("lambda1*d1=-c*lambda2, d1*lambda3=-a*lambda2, b=0"),
            BranchCondition::Combination(k) => write!(f, "bilinear combination {k}"),
            BranchCondition::DerivedCombination(k) => write!(f, "derived bilinear combination {k}"),
            BranchCondition::WorkedCase => f.write_str("combination 4 with nu11=0"),
            BranchCondition::ThreeTerm => f.write_str("{K1,P1}+mu{K2,P2}+nu L3^2"),
            BranchCondition::Generic(b) => write!(f, "generic {b:?}"),
        }
    }
}

/// `det(M)` under the condition, with every remaining parameter symbolic.
pub fn branch_determinant(cond: BranchCondition) -> Expr {
    cond.matrix().det()
}

pub fn branch_determinant_check(cond: BranchCondition, policy: &Policy) -> Result<ZeroCertificate, ZeroError> {
    certify_all(&[branch_determinant(cond)], policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zero::{random_param, rng_for};

    fn random_params(n: u8, seed: u64) -> BTreeMap<String, Scalar> {
        let mut rng = rng_for(seed);
        family_params(n).unwrap().into_iter().map(|k| (k, random_param(&mut rng))).collect()
    }

    #[test]
    fn families_are_killing() {
        let policy = Policy::default();
        for n in 1..=9 {
            let t = killing_family(n, &random_params(n, n as u64), &policy);
            assert!(t.is_ok(), "family {n}: {t:?}");
        }
    }

    #[test]
    fn family_five_reduces_to_xx() {
        let params = BTreeMap::from([("w5".to_string(), Scalar::one()), ("k5".to_string(), Scalar::one())]);
        let t = killing_family(5, &params, &Policy::default()).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let want = &x(a + 1) * &x(b + 1);
                assert!(simplify(&(&t.mu[a][b] - &want)).is_zero());
            }
        }
    }

    #[test]
    fn zero_parameters_give_zero_tensor() {
        let t = killing_family(9, &BTreeMap::new(), &Policy::default()).unwrap();
        assert!(t.mu.iter().flatten().all(Expr::is_zero));
    }

    #[test]
    fn non_killing_witness() {
        let mut mu: Tensor = std::array::from_fn(|_| std::array::from_fn(|_| Expr::zero()));
        mu[0][0] = Expr::pow(&x(2), 3);
        let cert = check_killing_identity(&mu, &Policy::default()).unwrap();
        assert!(matches!(cert, ZeroCertificate::NonZero { .. }));
    }

    #[test]
    fn xx_is_killing() {
        let mu = tensor(|a, b| &(&x(a) * &x(b)) * &p("kappa"));
        assert!(check_killing_identity(&mu, &Policy::default()).unwrap().is_exact_zero());
    }

    #[test]
    fn literal_family_six_is_not_killing() {
        let mu = bind_tensor(&family_six_as_printed(), &random_params(6, 3));
        assert!(!check_killing_identity(&mu, &Policy::default()).unwrap().is_zero());
    }

    #[test]
    fn canonical_forms_are_killing() {
        for d in 0..=2 {
            let mu = canonical_form(d).unwrap();
            let cert = check_killing_identity(&mu, &Policy::default()).unwrap();
            assert!(cert.is_zero(), "degree {d}: {cert:?}");
        }
    }

    #[test]
    fn linear_table_entry() {
        let m = build_m_matrix(Branch::Linear, None, &BTreeMap::new()).unwrap();
        let want = &(&p("c") * &x(3)).scale(&Scalar::from(-2)) + &(&p("lambda1") * &x(1));
        assert!(simplify(&(&m.m[0][0] - &want)).is_zero());
    }

    #[test]
    fn rank_one_condition() {
        let m = BranchCondition::AllOffZero.matrix();
        for a in 0..3 {
            for b in 0..3 {
                let want = &x(a + 1) * &p(&format!("lambda{}", b + 1));
                assert!(simplify(&(&m.m[a][b] - &want)).is_zero());
            }
        }
        assert!(branch_determinant(BranchCondition::AllOffZero).is_zero());
    }

    #[test]
    fn generic_determinant_is_nonzero() {
        let cert = branch_determinant_check(BranchCondition::Generic(Branch::Linear), &Policy::default()).unwrap();
        assert!(matches!(cert, ZeroCertificate::NonZero { .. }));
    }

    #[test]
    fn unknown_parameter_rejected() {
        let params = BTreeMap::from([("zeta".to_string(), Expr::one())]);
        assert!(build_m_matrix(Branch::Linear, None, &params).is_err());
    }
}
