//! Row verification: commutators, scale invariance, inversion pairs and the
//! determining-equation cross-check.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use super::{binding_suite, find_row, instantiate, Binding, CatalogError, CatalogRow, Instance};
use crate::determining::{default_eta_dictionary, eta_gradient, full_residuals, recover_eta};
use crate::diffop::{decompose, inversion_conjugate, DiffOp, Generator, GeneratorExpr, Hamiltonian};
use crate::expr::Expr;
use crate::lang::{parse_expr, serialize_expr};
use crate::normal::{normalize, simplify};
use crate::scalar::Scalar;
use crate::zero::{certify_all, derive_seed, zero_certificate, Policy, ZeroCertificate};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict")]
pub enum Verdict {
    Verified {
        certificate: ZeroCertificate,
    },
    /// `[H, Q]` has a nonzero coefficient, confirmed symbolically (when the
    /// coefficient is rational) and by an independent numeric witness.
    Discrepant {
        /// Multi-index of the failing coefficient of `[H, Q]`.
        component: [u8; 3],
        residual: String,
        symbolic: Option<bool>,
        numeric: ZeroCertificate,
        /// Scalar term that would make the integral commute, when one exists
        /// in the eta dictionary.
        suggested_scalar: Option<String>,
        /// Whether the integral commutes once its printed scalar part is halved.
        halved_scalar: Option<bool>,
    },
    /// The sampled and the confirming checks disagree.
    Unresolved {
        reason: String,
    },
    Skipped {
        reason: String,
    },
}

impl Verdict {
    pub fn is_verified(&self) -> bool {
        matches!(self, Verdict::Verified { .. })
    }

    pub fn is_discrepant(&self) -> bool {
        matches!(self, Verdict::Discrepant { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegralReport {
    pub source: String,
    pub verdict: Verdict,
    /// Whether the determining residuals all vanish; must agree with the verdict.
    pub residuals_zero: Option<bool>,
}

impl IntegralReport {
    pub fn equivalence_holds(&self) -> bool {
        match (&self.verdict, self.residuals_zero) {
            (Verdict::Verified { .. }, Some(z)) => z,
            (Verdict::Discrepant { .. }, Some(z)) => !z,
            _ => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairReport {
    pub p: usize,
    pub k: usize,
    /// `s` with `U Q_p U = s Q_k`, when it exists.
    pub sign: Option<String>,
    /// `s` for the second-order (or leading) parts alone.
    pub principal_sign: Option<String>,
    pub certificate: Option<ZeroCertificate>,
}

impl PairReport {
    pub fn holds(&self) -> bool {
        self.sign.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SkipReport {
    pub reason: String,
    pub compatibility_pde: String,
    /// The `a = b` specialization checked on the potential of Table 1 item 8.
    pub a_equals_b: Option<ZeroCertificate>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowReport {
    pub id: String,
    pub table: u8,
    pub item: u8,
    pub binding_index: usize,
    pub binding: std::collections::BTreeMap<String, String>,
    pub integrals: Vec<IntegralReport>,
    pub homogeneity: Option<ZeroCertificate>,
    pub scale_invariance: Option<ZeroCertificate>,
    pub inversion_pairs: Vec<PairReport>,
    pub skipped: Option<SkipReport>,
    pub notes: String,
    pub error: Option<String>,
}

impl RowReport {
    pub fn all_verified(&self) -> bool {
        self.error.is_none() && self.skipped.is_none() && self.integrals.iter().all(|i| i.verdict.is_verified())
    }

    /// Every integral is Verified, Discrepant or Skipped.
    pub fn explained(&self) -> bool {
        self.error.is_none()
            && self
                .integrals
                .iter()
                .all(|i| !matches!(i.verdict, Verdict::Unresolved { .. }))
    }

    pub fn equivalence_holds(&self) -> bool {
        self.integrals.iter().all(IntegralReport::equivalence_holds)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub rows: usize,
    pub verified: usize,
    pub discrepant: usize,
    pub skipped: usize,
    pub unresolved: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CatalogReport {
    pub seed: u64,
    pub points: usize,
    pub precision: u32,
    pub summary: Summary,
    pub reports: Vec<RowReport>,
}

impl CatalogReport {
    /// Ids of anchor rows with at least one binding not fully verified.
    pub fn failing_anchors(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .reports
            .iter()
            .filter(|r| super::is_anchor(r.table, r.item) && !r.all_verified())
            .map(|r| r.id.clone())
            .collect();
        out.dedup();
        out
    }
}

pub fn compatibility_pde() -> &'static str {
    "(a*y2^2 - b*y1^2 + a - b)*V_y1y2 + y1*y2*(a*V_y1y1 - b*V_y2y2) + 3*(a*y2*V_y1 - b*y1*V_y2) = 0, y1 = x1/x3, y2 = x2/x3"
}

/// Residual of the compatibility equation for a degree-zero `v`, written in
/// Cartesian derivatives: `V_yi = x3 V_i`, `V_yiyj = x3^2 V_ij`.
pub fn compatibility_residual(v: &Expr, a: &Expr, b: &Expr) -> Expr {
    let x3 = Expr::coord(3);
    let y1 = &Expr::coord(1) / &x3;
    let y2 = &Expr::coord(2) / &x3;
    let d = |e: &Expr, k: usize| e.diff(k);
    let w1 = &x3 * &d(v, 1);
    let w2 = &x3 * &d(v, 2);
    let x33 = &x3 * &x3;
    let w11 = &x33 * &d(&d(v, 1), 1);
    let w12 = &x33 * &d(&d(v, 1), 2);
    let w22 = &x33 * &d(&d(v, 2), 2);
    let coef = &(&(a * &(&y2 * &y2)) - &(b * &(&y1 * &y1))) + &(a - b);
    let terms = [
        &coef * &w12,
        &(&y1 * &y2) * &(&(a * &w11) - &(b * &w22)),
        (&(&(a * &y2) * &w1) - &(&(b * &y1) * &w2)).scale(&Scalar::from(3)),
    ];
    simplify(&Expr::sum(terms))
}

fn confirm_policy(policy: &Policy) -> Policy {
    Policy {
        precision: policy.precision * 2,
        ..policy.with_seed(derive_seed(policy.seed, "confirm"))
    }
}

fn tensor_degree(mu: &[[Expr; 3]; 3], policy: &Policy) -> Option<i32> {
    let c = mu.iter().flatten().find(|e| !e.is_zero())?;
    (-2..=4).find(|&k| {
        let scale = Scalar::from(2).pow(k as i64).expect("nonzero");
        zero_certificate(&simplify(&(&c.dilate(&Scalar::from(2)) - &c.scale(&scale))), policy).is_ok_and(|z| z.is_zero())
    })
}

fn additive_terms(e: &Expr) -> Vec<Expr> {
    let e = simplify(e);
    let terms: Vec<Expr> = match e.node() {
        crate::expr::Node::Sum(v) => v.clone(),
        _ if e.is_zero() => vec![],
        _ => vec![e.clone()],
    };
    terms.into_iter().map(|t| t.split_coefficient().1).collect()
}

/// Scalar term `s` such that the generator part of `g` plus `s` commutes with `h`.
fn suggest_scalar(h: &Hamiltonian, g: &GeneratorExpr, q: &DiffOp, policy: &Policy) -> Option<Expr> {
    if q.order() != 2 {
        return None;
    }
    let form = q.to_selfadjoint_form().ok()?;
    let deg = tensor_degree(&form.mu, policy)?;
    let w = eta_gradient(&form.mu, &h.f, &h.v);
    if !w.curl_certificate(policy).ok()?.is_zero() {
        return None;
    }
    let printed = g.scalar_part();
    let mut dict = default_eta_dictionary(deg - 2);
    let mut seen: BTreeSet<Expr> = dict.iter().cloned().collect();
    let r2 = Expr::r_squared();
    let mut extra = additive_terms(&printed);
    for t in additive_terms(&h.v) {
        extra.push(simplify(&(&t * &Expr::pow(&r2, (deg - 2) as i64 / 2))));
        if deg == 2 || deg == 0 {
            extra.push(simplify(&(&t * &Expr::pow(&r2, (deg - 2) as i64 / 2) * Expr::r_squared() / Expr::rt_squared())));
        }
    }
    for t in extra {
        if !t.is_zero() && t.as_const().is_none() && seen.insert(t.clone()) {
            dict.push(t);
        }
    }
    let eta = recover_eta(&w, &dict, policy)?;
    let mut generator_part = simplify(&(&form.eta - &printed));
    if generator_part.as_const().is_some() {
        generator_part = Expr::zero();
    }
    let s = simplify(&(&eta - &generator_part));
    let fixed = q.add(&DiffOp::scalar(simplify(&(&s - &printed))));
    commutes(h, &fixed, policy).then_some(s)
}

fn commutes(h: &Hamiltonian, q: &DiffOp, policy: &Policy) -> bool {
    h.to_diffop()
        .commutator(q)
        .ok()
        .and_then(|c| c.simplified().zero_certificate(policy).ok())
        .is_some_and(|c| c.is_zero())
}

fn halved_scalar(h: &Hamiltonian, g: &GeneratorExpr, q: &DiffOp, policy: &Policy) -> Option<bool> {
    let printed = g.scalar_part();
    if printed.is_zero() {
        return None;
    }
    Some(commutes(h, &q.add(&DiffOp::scalar(printed.scale(&Scalar::ratio(-1, 2)))), policy))
}

fn verdict_for(h: &Hamiltonian, hop: &DiffOp, g: &GeneratorExpr, q: &DiffOp, policy: &Policy) -> Verdict {
    let comm = match hop.commutator(q) {
        Ok(c) => c.simplified(),
        Err(e) => return Verdict::Unresolved { reason: e.to_string() },
    };
    let cert = match comm.zero_certificate(policy) {
        Ok(c) => c,
        Err(e) => return Verdict::Unresolved { reason: e.to_string() },
    };
    if cert.is_zero() {
        return Verdict::Verified { certificate: cert };
    }
    let confirm = confirm_policy(policy);
    for (m, c) in comm.terms() {
        let Ok(num) = zero_certificate(c, &confirm) else { continue };
        if num.is_zero() {
            continue;
        }
        let symbolic = match normalize(c) {
            Ok(n) if !n.has_kernel() => Some(!n.is_zero()),
            _ => None,
        };
        if symbolic == Some(false) {
            return Verdict::Unresolved {
                reason: "normal form vanishes but sampling does not".into(),
            };
        }
        let text = serialize_expr(c);
        return Verdict::Discrepant {
            component: *m,
            residual: if text.len() > 400 { format!("{}...", &text[..400]) } else { text },
            symbolic,
            numeric: num,
            suggested_scalar: suggest_scalar(h, g, q, policy).map(|e| serialize_expr(&e)),
            halved_scalar: halved_scalar(h, g, q, policy),
        };
    }
    Verdict::Unresolved {
        reason: "no coefficient confirmed nonzero at higher precision".into(),
    }
}

fn residuals_zero(h: &Hamiltonian, q: &DiffOp, eta_shift: &Expr, policy: &Policy) -> Option<bool> {
    let mu = q.mu();
    let r = full_residuals(&mu, &q.first_order(), &(&q.zeroth_order() + eta_shift), &h.f, &h.v);
    r.certificate(policy).ok().map(|c| c.is_zero())
}

fn pair_report(inst: &Instance, p: usize, k: usize, policy: &Policy) -> PairReport {
    let mut rep = PairReport {
        p,
        k,
        sign: None,
        principal_sign: None,
        certificate: None,
    };
    let Ok(conj) = inversion_conjugate(&inst.operators[p]) else { return rep };
    let target = &inst.operators[k];
    if let Some(d) = decompose(&conj, std::slice::from_ref(target), policy) {
        rep.sign = Some(d.coefficients[0].to_string());
        rep.certificate = Some(d.certificate);
    }
    let lead = |op: &DiffOp| {
        let ord = op.order();
        DiffOp::from_terms(op.terms().filter(|(m, _)| m.iter().map(|&v| v as u32).sum::<u32>() == ord).map(|(m, e)| (*m, e.clone())))
    };
    if let Some(d) = decompose(&lead(&conj), &[lead(target)], policy) {
        rep.principal_sign = Some(d.coefficients[0].to_string());
    }
    rep
}

fn a_equals_b_check(binding: &Binding, policy: &Policy) -> Option<ZeroCertificate> {
    let rows = super::builtin_catalog();
    let row8 = find_row(&rows, 1, 8)?;
    let mut b = binding.clone();
    for (j, s) in row8.slots.iter().enumerate() {
        b.slots.entry(s.name.clone()).or_insert_with(|| parse_expr(if j == 0 { "sin(phi)" } else { "cos(theta)^2" }).expect("valid"));
    }
    let inst = instantiate(row8, &b).ok()?;
    let one = Expr::one();
    zero_certificate(&compatibility_residual(&inst.hamiltonian.v, &one, &one), policy).ok()
}

pub fn verify_row(row: &CatalogRow, binding: &Binding, policy: &Policy) -> RowReport {
    verify_row_indexed(row, binding, 0, policy)
}

fn verify_row_indexed(row: &CatalogRow, binding: &Binding, index: usize, policy: &Policy) -> RowReport {
    let mut rep = RowReport {
        id: row.id(),
        table: row.table,
        item: row.item,
        binding_index: index,
        binding: binding.describe(),
        integrals: Vec::new(),
        homogeneity: None,
        scale_invariance: None,
        inversion_pairs: Vec::new(),
        skipped: None,
        notes: row.notes.clone(),
        error: None,
    };
    if let Some(reason) = &row.skip {
        rep.integrals = row
            .integrals
            .iter()
            .map(|s| IntegralReport {
                source: s.clone(),
                verdict: Verdict::Skipped { reason: reason.clone() },
                residuals_zero: None,
            })
            .collect();
        rep.skipped = Some(SkipReport {
            reason: reason.clone(),
            compatibility_pde: compatibility_pde().into(),
            a_equals_b: a_equals_b_check(binding, policy),
        });
        return rep;
    }
    let inst = match instantiate(row, binding) {
        Ok(i) => i,
        Err(e) => {
            rep.error = Some(e.to_string());
            return rep;
        }
    };
    let h = &inst.hamiltonian;
    let hop = h.to_diffop();
    let two = Scalar::from(2);
    let homog = [simplify(&(&h.f.dilate(&two) - &h.f.scale(&Scalar::from(4)))), simplify(&(&h.v.dilate(&two) - &h.v))];
    rep.homogeneity = certify_all(&homog, policy).ok();
    rep.scale_invariance = Generator::D
        .op()
        .commutator(&hop)
        .ok()
        .and_then(|c| c.simplified().zero_certificate(policy).ok());
    rep.integrals = row
        .integrals
        .par_iter()
        .zip(inst.integrals.par_iter().zip(&inst.operators))
        .map(|(src, (g, q))| IntegralReport {
            source: src.clone(),
            verdict: verdict_for(h, &hop, g, q, policy),
            residuals_zero: residuals_zero(h, q, &Expr::zero(), policy),
        })
        .collect();
    rep.inversion_pairs = row.inversion_pairs.iter().map(|&[p, k]| pair_report(&inst, p, k, policy)).collect();
    rep
}

/// Runs every row against every binding of the default suite.
pub fn verify_catalog(rows: &[CatalogRow], policy: &Policy) -> CatalogReport {
    verify_catalog_with(rows, &|r: &CatalogRow| binding_suite(r, policy.seed), policy)
}

/// As [`verify_catalog`] with caller-chosen bindings per row.
pub fn verify_catalog_with(rows: &[CatalogRow], bindings: &(dyn Fn(&CatalogRow) -> Vec<Binding> + Sync), policy: &Policy) -> CatalogReport {
    let jobs: Vec<(usize, usize, Binding)> = rows
        .iter()
        .enumerate()
        .flat_map(|(i, r)| bindings(r).into_iter().enumerate().map(move |(k, b)| (i, k, b)))
        .collect();
    let reports: Vec<RowReport> = jobs
        .par_iter()
        .map(|(i, k, b)| {
            let p = policy.with_seed(derive_seed(policy.seed, &format!("{}/{k}", rows[*i].id())));
            verify_row_indexed(&rows[*i], b, *k, &p)
        })
        .collect();
    let mut summary = Summary {
        rows: reports.len(),
        ..Summary::default()
    };
    for r in &reports {
        for i in &r.integrals {
            match i.verdict {
                Verdict::Verified { .. } => summary.verified += 1,
                Verdict::Discrepant { .. } => summary.discrepant += 1,
                Verdict::Skipped { .. } => summary.skipped += 1,
                Verdict::Unresolved { .. } => summary.unresolved += 1,
            }
        }
        if r.error.is_some() {
            summary.unresolved += 1;
        }
    }
    CatalogReport {
        seed: policy.seed,
        points: policy.points,
        precision: policy.precision,
        summary,
        reports,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Perturbation {
    Eta,
    Potential,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbationOutcome {
    pub id: String,
    pub integral: usize,
    pub kind: Perturbation,
    pub added: String,
    pub residuals_zero: bool,
    pub commutator_zero: bool,
}

const PERTURBATIONS: [&str; 5] = ["x1*x2^2*x3^3", "x1 + 2*x2 + 3*x3", "x1^2*x3/x2", "x2*x3^2 + x1", "x1*x2/x3 + x3"];

/// The `n`-th perturbed negative for an instantiated row: adds `g_n / 3` to
/// the scalar part of one integral (`n` even) or to the potential (`n` odd).
pub fn perturbation_check(row: &CatalogRow, binding: &Binding, n: usize, policy: &Policy) -> Result<PerturbationOutcome, CatalogError> {
    let inst = instantiate(row, binding)?;
    let which = n % inst.operators.len();
    let g = parse_expr(PERTURBATIONS[n % PERTURBATIONS.len()]).expect("valid").scale(&Scalar::ratio(1, 3));
    let kind = if n.is_multiple_of(2) { Perturbation::Eta } else { Perturbation::Potential };
    let (h, q) = match kind {
        Perturbation::Eta => (inst.hamiltonian.clone(), inst.operators[which].add(&DiffOp::scalar(g.clone()))),
        Perturbation::Potential => (
            Hamiltonian::new(inst.hamiltonian.f.clone(), simplify(&(&inst.hamiltonian.v + &g))),
            inst.operators[which].clone(),
        ),
    };
    let comm = h
        .to_diffop()
        .commutator(&q)
        .map_err(|source| CatalogError::DiffOp { row: row.id(), source })?
        .simplified();
    let commutator_zero = comm.zero_certificate(policy).map(|c| c.is_zero()).unwrap_or(false);
    let residuals_zero = residuals_zero(&h, &q, &Expr::zero(), policy).unwrap_or(false);
    Ok(PerturbationOutcome {
        id: row.id(),
        integral: which,
        kind,
        added: serialize_expr(&g),
        residuals_zero,
        commutator_zero,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{builtin_catalog, find_row, Binding};
    use super::*;

    fn bind(row: &CatalogRow, k: usize) -> Binding {
        binding_suite(row, Policy::default().seed)[k].clone()
    }

    #[test]
    fn row_two_fourteen_verified() {
        let rows = builtin_catalog();
        let row = find_row(&rows, 2, 14).unwrap();
        let rep = verify_row(row, &Binding::default(), &Policy::default());
        assert!(rep.all_verified(), "{rep:?}");
        assert_eq!(rep.integrals.len(), 3);
        assert!(rep.inversion_pairs[0].holds());
        assert!(rep.equivalence_holds());
    }

    #[test]
    fn corrupted_row_is_discrepant() {
        let rows = builtin_catalog();
        let mut row = find_row(&rows, 2, 14).unwrap().clone();
        row.v = "2*rt^2/x3^2".into();
        let rep = verify_row(&row, &Binding::default(), &Policy::default());
        let v = &rep.integrals[0].verdict;
        match v {
            Verdict::Discrepant { symbolic, numeric, suggested_scalar, .. } => {
                assert_eq!(*symbolic, Some(true));
                assert!(!numeric.is_zero());
                assert_eq!(suggested_scalar.as_deref(), Some("2/x3^2"));
            }
            other => panic!("{other:?}"),
        }
        assert!(rep.integrals[2].verdict.is_verified());
        assert!(rep.equivalence_holds());
    }

    #[test]
    fn anticommutator_scalars_are_doubled() {
        let rows = builtin_catalog();
        let row = find_row(&rows, 1, 2).unwrap();
        let b = Binding {
            slots: [("F".to_string(), Expr::one()), ("G".to_string(), Expr::zero())].into(),
            params: [("c".to_string(), Scalar::from(1))].into(),
        };
        let rep = verify_row(row, &b, &Policy::default());
        assert!(rep.equivalence_holds());
        match &rep.integrals[0].verdict {
            Verdict::Discrepant { halved_scalar, suggested_scalar, symbolic, .. } => {
                assert_eq!(*halved_scalar, Some(true));
                assert_eq!(*symbolic, Some(true));
                let s = parse_expr(suggested_scalar.as_deref().unwrap()).unwrap();
                assert!(zero_certificate(&(&s + &parse_expr("1/r").unwrap()), &Policy::default()).unwrap().is_zero());
            }
            other => panic!("{other:?}"),
        }
        // the image of the first integral under inversion is -{K3,D} - c r
        assert!(rep.integrals[1].verdict.is_discrepant());
        assert_eq!(rep.inversion_pairs[0].sign, None);
        assert_eq!(rep.inversion_pairs[0].principal_sign.as_deref(), Some("-1"));
    }

    #[test]
    fn first_order_generators() {
        let rows = builtin_catalog();
        for item in [15, 16, 17] {
            let row = find_row(&rows, 2, item).unwrap();
            let rep = verify_row(row, &bind(row, 1), &Policy::default());
            assert!(rep.all_verified(), "{item}: {rep:?}");
            assert!(rep.scale_invariance.as_ref().unwrap().is_zero());
        }
    }

    #[test]
    fn skipped_row_carries_compatibility() {
        let rows = builtin_catalog();
        let row = find_row(&rows, 1, 11).unwrap();
        let rep = verify_row(row, &bind(row, 0), &Policy::default());
        let s = rep.skipped.unwrap();
        assert!(s.a_equals_b.unwrap().is_zero());
        assert!(matches!(rep.integrals[0].verdict, Verdict::Skipped { .. }));
    }

    #[test]
    fn compatibility_rejects_generic_potential() {
        let v = parse_expr("x1^2/x3^2 + x1*x2/r^2").unwrap();
        let r = compatibility_residual(&v, &Expr::one(), &Expr::one());
        assert!(!zero_certificate(&r, &Policy::default()).unwrap().is_zero());
    }
}
