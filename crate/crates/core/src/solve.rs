//! Integral-of-motion finder: polynomial conformal Killing ansatz, sampled
//! linear constraints, exact nullspace, eta recovery and certification.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::determining::{default_eta_dictionary, eta_gradient, f_equation, recover_eta, second_order_equation, divergence, EtaGradient};
use crate::diffop::{decompose, DiffOp, DiffOpError, Generator, Hamiltonian};
use crate::expr::Expr;
use crate::killing::{check_killing_identity, killing_residuals, KillingTag, KillingTensor, Tensor};
use crate::lang::serialize_expr;
use crate::normal::simplify;
use crate::sample::{sample_rows, Cell, SampleError};
use crate::scalar::Scalar;
use crate::zero::{certify_all, derive_seed, Policy, ZeroCertificate, ZeroError};

pub const MAX_DEGREE: u32 = 4;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolveError {
    #[error("degree {0} outside 0..=4")]
    Degree(u32),
    #[error("transcendental f or V; enable the numeric fallback")]
    NeedsNumeric,
    #[error("sampling failed: {0}")]
    Sample(#[from] SampleError),
    #[error("nullspace computation failed")]
    Nullspace,
    #[error("nullspace vector {index} at degree {degree} does not verify")]
    Unverified { degree: u32, index: usize },
    #[error(transparent)]
    Zero(#[from] ZeroError),
    #[error(transparent)]
    DiffOp(#[from] DiffOpError),
}

/// Polynomial conformal Killing tensors of fixed homogeneity degrees.
#[derive(Clone, Debug)]
pub struct AnsatzSpace {
    pub degrees: Vec<u32>,
    pub basis: Vec<KillingTensor>,
    /// Degree of each basis tensor.
    pub basis_degree: Vec<u32>,
}

impl AnsatzSpace {
    pub fn new(degrees: &[u32]) -> Result<AnsatzSpace, SolveError> {
        let mut ds: Vec<u32> = degrees.to_vec();
        ds.sort();
        ds.dedup();
        let mut basis = Vec::new();
        let mut basis_degree = Vec::new();
        for &d in &ds {
            for t in polynomial_killing_basis(d)? {
                basis.push(KillingTensor {
                    mu: t.clone(),
                    tag: KillingTag::Custom,
                    params: BTreeMap::new(),
                });
                basis_degree.push(d);
            }
        }
        Ok(AnsatzSpace { degrees: ds, basis, basis_degree })
    }

    pub fn param_count(&self) -> usize {
        self.basis.len()
    }

    pub fn param_names(&self) -> Vec<String> {
        (0..self.basis.len()).map(|k| format!("a{k}")).collect()
    }

    /// `sum_k a_k B_k` with symbolic coefficients `a_k`.
    pub fn symbolic(&self) -> Tensor {
        let names = self.param_names();
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                Expr::sum(self.basis.iter().zip(&names).map(|(b, n)| &b.mu[i][j] * &Expr::param(n)))
            })
        })
    }

    pub fn combine(&self, coeffs: &[Scalar]) -> Tensor {
        combine(&self.basis.iter().map(|b| b.mu.clone()).collect::<Vec<_>>(), coeffs)
    }
}

fn combine(basis: &[Tensor], coeffs: &[Scalar]) -> Tensor {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            simplify(&Expr::sum(
                basis.iter().zip(coeffs).filter(|(_, c)| !c.is_zero()).map(|(b, c)| b[i][j].scale(c)),
            ))
        })
    })
}

fn monomials(deg: u32) -> Vec<Expr> {
    let mut out = Vec::new();
    for i in (0..=deg).rev() {
        for j in (0..=(deg - i)).rev() {
            let k = deg - i - j;
            out.push(Expr::product([
                Expr::pow(&Expr::coord(1), i as i64),
                Expr::pow(&Expr::coord(2), j as i64),
                Expr::pow(&Expr::coord(3), k as i64),
            ]));
        }
    }
    out
}

const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

fn unit_tensor(pair: (usize, usize), m: &Expr) -> Tensor {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            if (i, j) == pair || (j, i) == pair {
                m.clone()
            } else {
                Expr::zero()
            }
        })
    })
}

fn compute_basis(deg: u32) -> Vec<Tensor> {
    let units: Vec<Tensor> = monomials(deg)
        .iter()
        .flat_map(|m| PAIRS.iter().map(move |&p| unit_tensor(p, m)))
        .collect();
    let residuals: Vec<Vec<Expr>> = units.iter().map(killing_residuals).collect();
    let ncomp = residuals[0].len();
    let cells: Vec<Cell> = (0..ncomp)
        .map(|c| (residuals.iter().map(|r| r[c].clone()).collect(), Expr::zero()))
        .collect();
    let n = units.len();
    let rows = sample_rows(&cells, n, 2 * n.div_ceil(ncomp) + 6, derive_seed(0x5CA1_E1A7, "ckt"), false)
        .expect("polynomial residuals evaluate exactly");
    let null = rows.nullspace(n).expect("exact nullspace");
    let policy = Policy::default();
    null.iter()
        .map(|v| {
            let t = combine(&units, v);
            assert!(check_killing_identity(&t, &policy).map(|c| c.is_exact_zero()).unwrap_or(false));
            t
        })
        .collect()
}

/// Basis of homogeneous polynomial conformal Killing tensors of degree
/// `deg`, including the pure-trace tensors `delta^{ab} p(x)`.
pub fn polynomial_killing_basis(deg: u32) -> Result<&'static [Tensor], SolveError> {
    static CACHE: [OnceLock<Vec<Tensor>>; 5] = [const { OnceLock::new() }; 5];
    let slot = CACHE.get(deg as usize).ok_or(SolveError::Degree(deg))?;
    Ok(slot.get_or_init(|| compute_basis(deg)))
}

#[derive(Clone, Debug)]
pub struct FindOptions {
    pub policy: Policy,
    pub numeric_fallback: bool,
    /// Extra eta dictionary entries, tried alongside the default one.
    pub dictionary: Vec<Expr>,
    /// Points per unknown when sampling constraints.
    pub oversampling: usize,
}

impl Default for FindOptions {
    fn default() -> Self {
        FindOptions {
            policy: Policy::default(),
            numeric_fallback: false,
            dictionary: Vec::new(),
            oversampling: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EtaPart {
    Recovered {
        #[serde(serialize_with = "ser_expr")]
        eta: Expr,
    },
    /// `eta` outside the dictionary; certified through its gradient.
    GradientOnly { gradient: EtaGradient },
}

fn ser_expr<S: serde::Serializer>(e: &Expr, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&serialize_expr(e))
}

fn ser_tensor<S: serde::Serializer>(t: &Tensor, s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<String>> = t.iter().map(|r| r.iter().map(serialize_expr).collect()).collect();
    serde::Serialize::serialize(&rows, s)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FoundIntegral {
    pub degree: u32,
    #[serde(serialize_with = "ser_tensor")]
    pub mu: Tensor,
    pub eta: EtaPart,
    /// Certificate of `[H, Q] = 0`.
    pub certificate: ZeroCertificate,
    pub rendering: Option<String>,
}

impl FoundIntegral {
    /// The operator `d_b mu^{ab} d_a + eta`; `None` for gradient-only results.
    pub fn operator(&self) -> Option<DiffOp> {
        match &self.eta {
            EtaPart::Recovered { eta } => Some(DiffOp::from_selfadjoint(&self.mu, eta)),
            EtaPart::GradientOnly { .. } => None,
        }
    }

    pub fn principal(&self) -> DiffOp {
        DiffOp::from_selfadjoint(&self.mu, &Expr::zero())
    }
}

fn degree_of_eta(deg: u32) -> i32 {
    deg as i32 - 2
}

fn sampled_nullspace(
    columns: &[Vec<Expr>],
    oversampling: usize,
    seed: u64,
    numeric: bool,
) -> Result<Vec<Vec<Scalar>>, SolveError> {
    let n = columns.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let ncomp = columns[0].len();
    let cells: Vec<Cell> = (0..ncomp)
        .map(|c| (columns.iter().map(|col| col[c].clone()).collect(), Expr::zero()))
        .collect();
    let points = (oversampling * n).div_ceil(ncomp.max(1)) + 3;
    let rows = sample_rows(&cells, n, points, seed, numeric).map_err(|e| match e {
        SampleError::NeedsNumeric => SolveError::NeedsNumeric,
        e => SolveError::Sample(e),
    })?;
    rows.nullspace(n).ok_or(SolveError::Nullspace)
}

/// Constant-coefficient combinations of the degree-`deg` ansatz satisfying the
/// f-equation alone.
pub fn f_constraint_nullspace(f: &Expr, deg: u32, policy: &Policy, numeric: bool) -> Result<Vec<Tensor>, SolveError> {
    let basis = polynomial_killing_basis(deg)?;
    let cols: Vec<Vec<Expr>> = basis.par_iter().map(|b| f_equation(b, f).to_vec()).collect();
    let null = sampled_nullspace(&cols, 3, derive_seed(policy.seed, "f-constraint"), numeric)?;
    Ok(null.iter().map(|v| combine(basis, v)).collect())
}

/// `[H, eta]` expressed through `W = grad eta`.
fn eta_commutator(f: &Expr, w: &[Expr; 3]) -> DiffOp {
    let mut terms: Vec<([u8; 3], Expr)> = (0..3)
        .map(|a| {
            let mut m = [0u8; 3];
            m[a] = 1;
            (m, simplify(&(f * &w[a]).scale(&Scalar::from(-2))))
        })
        .collect();
    let div = Expr::sum((0..3).map(|a| (f * &w[a]).diff(a + 1)));
    terms.push(([0, 0, 0], simplify(&-div)));
    DiffOp::from_terms(terms)
}

fn degree_block(h: &Hamiltonian, deg: u32, opts: &FindOptions) -> Result<Vec<FoundIntegral>, SolveError> {
    let policy = &opts.policy;
    let f = &h.f;
    let basis = polynomial_killing_basis(deg)?;
    // stage one: f-equation and the (a,b) equation, independent of V
    let cols: Vec<Vec<Expr>> = basis
        .par_iter()
        .map(|b| {
            let xi = divergence(b);
            let mut v = f_equation(b, f).to_vec();
            v.extend(second_order_equation(b, &xi, f));
            v
        })
        .collect();
    let seed = derive_seed(policy.seed, &format!("find-{deg}"));
    let null = sampled_nullspace(&cols, opts.oversampling, seed, opts.numeric_fallback)?;
    let stage: Vec<Tensor> = null.iter().map(|v| combine(basis, v)).collect();
    if stage.is_empty() {
        return Ok(Vec::new());
    }
    // stage two: integrability of the eta gradient
    let grads: Vec<EtaGradient> = stage.par_iter().map(|t| eta_gradient(t, f, &h.v)).collect();
    let cols: Vec<Vec<Expr>> = grads.iter().map(|g| g.curl.to_vec()).collect();
    let null = sampled_nullspace(&cols, opts.oversampling, seed ^ 0xc041, opts.numeric_fallback)?;
    let mut dictionary = default_eta_dictionary(degree_of_eta(deg));
    dictionary.extend(opts.dictionary.iter().cloned());
    let hop = h.to_diffop();
    null.par_iter()
        .enumerate()
        .map(|(index, v)| {
            let mu = combine(&stage, v);
            let fail = || SolveError::Unverified { degree: deg, index };
            let w = eta_gradient(&mu, f, &h.v);
            if !certify_all(&f_equation(&mu, f), policy)?.is_zero() || !w.curl_certificate(policy)?.is_zero() {
                return Err(fail());
            }
            let (eta, certificate) = match recover_eta(&w, &dictionary, policy) {
                Some(eta) => {
                    let q = DiffOp::from_selfadjoint(&mu, &eta);
                    let c = hop.commutator(&q)?.simplified().zero_certificate(policy)?;
                    (EtaPart::Recovered { eta }, c)
                }
                None => {
                    let q0 = DiffOp::from_selfadjoint(&mu, &Expr::zero());
                    let c = hop.commutator(&q0)?.add(&eta_commutator(f, &w.w)).simplified().zero_certificate(policy)?;
                    (EtaPart::GradientOnly { gradient: w }, c)
                }
            };
            if !certificate.is_zero() {
                return Err(fail());
            }
            let mut found = FoundIntegral {
                degree: deg,
                mu,
                eta,
                certificate,
                rendering: None,
            };
            found.rendering = render(&found, policy);
            Ok(found)
        })
        .collect()
}

/// Second-order integrals of `H = -d_a f d_a + V` whose leading tensor is a
/// homogeneous polynomial of one of `degrees`.
pub fn find_integrals(f: &Expr, v: &Expr, degrees: &[u32], opts: &FindOptions) -> Result<Vec<FoundIntegral>, SolveError> {
    if let Some(&d) = degrees.iter().find(|&&d| d > MAX_DEGREE) {
        return Err(SolveError::Degree(d));
    }
    let mut ds = degrees.to_vec();
    ds.sort();
    ds.dedup();
    let h = Hamiltonian::new(simplify(f), simplify(v));
    let blocks: Vec<Result<Vec<FoundIntegral>, SolveError>> = ds.par_iter().map(|&d| degree_block(&h, d, opts)).collect();
    let mut out = Vec::new();
    for b in blocks {
        out.extend(b?);
    }
    Ok(out)
}

/// Whether `q` lies in the constant span of the found integrals and `H`.
pub fn span_contains(found: &[FoundIntegral], h: &Hamiltonian, q: &DiffOp, policy: &Policy) -> bool {
    let mut basis: Vec<DiffOp> = found.iter().filter_map(FoundIntegral::operator).collect();
    basis.push(h.to_diffop());
    basis.push(DiffOp::scalar(Expr::one()));
    // additive constants may depend on the coupling parameters
    let params: std::collections::BTreeSet<String> = q.terms().chain(h.to_diffop().terms().collect::<Vec<_>>()).flat_map(|(_, e)| e.params()).collect();
    basis.extend(params.iter().map(|p| DiffOp::scalar(Expr::param(p))));
    decompose(q, &basis, policy).is_some()
}

/// Whether the second-order part of `q` lies in the span of the found leading tensors.
pub fn span_contains_principal(found: &[FoundIntegral], h: &Hamiltonian, q: &DiffOp, policy: &Policy) -> bool {
    let Ok(form) = q.to_selfadjoint_form() else { return false };
    let target = DiffOp::from_selfadjoint(&form.mu, &Expr::zero());
    let mut basis: Vec<DiffOp> = found.iter().map(FoundIntegral::principal).collect();
    basis.push(DiffOp::from_selfadjoint(&std::array::from_fn(|i| std::array::from_fn(|j| if i == j { h.f.clone() } else { Expr::zero() })), &Expr::zero()));
    decompose(&target, &basis, policy).is_some()
}

fn generator_degree(g: Generator) -> u32 {
    match g {
        Generator::P(_) => 0,
        Generator::L(_) | Generator::D => 1,
        Generator::K(_) => 2,
    }
}

fn bilinears(deg: u32) -> Vec<(Generator, Generator)> {
    let gens = Generator::all();
    let mut out = Vec::new();
    for (i, &a) in gens.iter().enumerate() {
        for &b in &gens[i..] {
            if generator_degree(a) + generator_degree(b) == deg {
                out.push((a, b));
            }
        }
    }
    out
}

fn bilinear_ops(deg: u32) -> &'static [(Generator, Generator, DiffOp)] {
    static CACHE: [OnceLock<Vec<(Generator, Generator, DiffOp)>>; 5] = [const { OnceLock::new() }; 5];
    CACHE[deg as usize].get_or_init(|| {
        bilinears(deg)
            .into_iter()
            .map(|(a, b)| {
                let op = a.op().anticommutator(&b.op()).expect("first order").simplified();
                (a, b, op)
            })
            .collect()
    })
}

fn coefficient_text(c: &Scalar) -> String {
    let s = serialize_expr(&Expr::constant(c.clone()));
    if s.contains(['+', ' ']) || (s.starts_with('-') && s[1..].contains('-')) {
        format!("({s})")
    } else {
        s
    }
}

/// `sum_k c_k {A_k, B_k} + eta` with squares written as `A^2`.
fn render(found: &FoundIntegral, policy: &Policy) -> Option<String> {
    let pieces = bilinear_ops(found.degree);
    let target = found.principal();
    let principal: Vec<DiffOp> = pieces.iter().map(|(_, _, op)| DiffOp::from_selfadjoint(&op.mu(), &Expr::zero())).collect();
    let d = decompose(&target, &principal, policy)?;
    let mut terms = Vec::new();
    let mut eta_shift = Expr::zero();
    for ((a, b, op), c) in pieces.iter().zip(&d.coefficients) {
        if c.is_zero() {
            continue;
        }
        let (text, c) = if a == b {
            (format!("{a}^2"), c * &Scalar::from(2))
        } else {
            (format!("{{{a},{b}}}"), c.clone())
        };
        let coef = if c.is_one() {
            String::new()
        } else if (-&c).is_one() {
            "-".to_string()
        } else {
            format!("{}*", coefficient_text(&c))
        };
        terms.push(format!("{coef}{text}"));
        let scale = if a == b { &c / &Scalar::from(2) } else { c.clone() };
        eta_shift = &eta_shift + &op.zeroth_order().scale(&scale);
    }
    if let EtaPart::Recovered { eta } = &found.eta {
        let rest = simplify(&(eta - &eta_shift));
        if !rest.is_zero() {
            terms.push(serialize_expr(&rest));
        }
    } else {
        terms.push("eta".to_string());
    }
    let mut s = String::new();
    for (k, t) in terms.iter().enumerate() {
        if k == 0 {
            s.push_str(t);
        } else if let Some(r) = t.strip_prefix('-') {
            s.push_str(" - ");
            s.push_str(r);
        } else {
            s.push_str(" + ");
            s.push_str(t);
        }
    }
    Some(if s.is_empty() { "0".into() } else { s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_expr;
    use crate::diffop::Hamiltonian;

    fn e(s: &str) -> Expr {
        parse_expr(s).unwrap()
    }

    #[test]
    fn killing_basis_dimensions() {
        // traceless part plus delta times homogeneous polynomials
        let dims: Vec<usize> = (0..=4).map(|d| polynomial_killing_basis(d).unwrap().len()).collect();
        let trace: Vec<usize> = (0..=4).map(|d| (d + 1) * (d + 2) / 2).collect();
        let traceless: Vec<usize> = dims.iter().zip(&trace).map(|(a, b)| a - b).collect();
        // inversion pairs degree n with 4 - n; the trace-free total is 35
        assert_eq!(traceless, vec![5, 8, 9, 8, 5]);
        assert_eq!(traceless.iter().sum::<usize>(), 35);
    }

    #[test]
    fn f_constraint_dimension() {
        let policy = Policy::default();
        assert_eq!(f_constraint_nullspace(&e("x3^2"), 0, &policy, false).unwrap().len(), 3);
        assert_eq!(f_constraint_nullspace(&e("17*x3^2"), 0, &policy, false).unwrap().len(), 3);
    }

    fn op(s: &str) -> DiffOp {
        crate::diffop::expand_generators(&crate::lang::parse_operator(s).unwrap()).unwrap()
    }

    #[test]
    fn rotation_invariant_mass() {
        let opts = FindOptions::default();
        let found = find_integrals(&e("r^2"), &e("c*r^2/x3^2"), &[2], &opts).unwrap();
        assert!(found.iter().all(|q| q.certificate.is_zero()));
        let h = Hamiltonian::new(e("r^2"), e("c*r^2/x3^2"));
        assert!(span_contains(&found, &h, &op("L3^2"), &opts.policy));
        assert!(span_contains(&found, &h, &op("{L1,L2} - 2*c*x1*x2/x3^2"), &opts.policy));
        assert!(!span_contains(&found, &h, &op("{L1,L2} + 4*c*x1*x2/x3^2"), &opts.policy));
        assert!(span_contains_principal(&found, &h, &op("{L1,L2}"), &opts.policy));
        assert!(!span_contains_principal(&found, &h, &op("{P1,P2}"), &opts.policy));
    }

    #[test]
    fn axial_mass_inverse_square() {
        let opts = FindOptions::default();
        let found = find_integrals(&e("x3^2"), &e("c*x3^2/x1^2"), &[0, 1, 2], &opts).unwrap();
        let h = Hamiltonian::new(e("x3^2"), e("c*x3^2/x1^2"));
        for q in ["{L3,P1} - 2*c*x2/x1^2", "{P1,K1} + 2*c*r^2/x1^2", "P2^2", "{P2,D}"] {
            assert!(span_contains(&found, &h, &op(q), &opts.policy), "{q}");
        }
        let small = find_integrals(&e("x3^2"), &e("c*x3^2/x1^2"), &[0], &opts).unwrap();
        assert!(small.len() < found.len());
    }

    #[test]
    fn constant_potential_degree_zero() {
        let opts = FindOptions::default();
        let found = find_integrals(&e("x3^2"), &e("17*x3^2"), &[0], &opts).unwrap();
        assert_eq!(found.len(), 3);
        let h = Hamiltonian::new(e("x3^2"), e("17*x3^2"));
        for q in ["P1^2", "P2^2", "{P1,P2}"] {
            assert!(span_contains(&found, &h, &op(q), &opts.policy), "{q}");
        }
        let rendered: Vec<String> = found.iter().filter_map(|q| q.rendering.clone()).collect();
        assert_eq!(rendered, ["-P1^2", "-P2^2", "-{P1,P2}"]);
    }

    #[test]
    fn disjoint_samples_agree() {
        let a = FindOptions::default();
        let b = FindOptions { policy: Policy::default().with_seed(99), ..FindOptions::default() };
        let fa = find_integrals(&e("x3^2"), &e("c*x3^2/x1^2"), &[1], &a).unwrap();
        let fb = find_integrals(&e("x3^2"), &e("c*x3^2/x1^2"), &[1], &b).unwrap();
        assert_eq!(fa.iter().map(|q| q.mu.clone()).collect::<Vec<_>>(), fb.iter().map(|q| q.mu.clone()).collect::<Vec<_>>());
    }

    #[test]
    fn transcendental_needs_fallback() {
        let r = find_integrals(&e("rt^2*sin(phi)"), &e("1"), &[0], &FindOptions::default());
        assert_eq!(r.unwrap_err(), SolveError::NeedsNumeric);
    }

    #[test]
    fn degree_out_of_range() {
        assert_eq!(find_integrals(&e("r^2"), &e("1"), &[5], &FindOptions::default()).unwrap_err(), SolveError::Degree(5));
    }
}
