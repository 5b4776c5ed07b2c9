//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! A criterion that fails because the printed data is wrong is reported as
//! FAIL; the run itself only errors when an outcome differs from the recorded
//! one (a FAIL that became a PASS, or a new failure).

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use pdmsym::catalog::{
    binding_suite, builtin_catalog, find_row, is_anchor, perturbation_check, verify_catalog, verify_row, Verdict,
    ANCHOR_ROWS,
};
use pdmsym::diffop::{decompose, recognize_generators};
use pdmsym::killing::{
    bind_tensor, branch_determinant_check, check_killing_identity, family_params, family_six_as_printed,
    family_symbolic, Branch, BranchCondition,
};
use pdmsym::solve::{find_integrals, span_contains, span_contains_principal, FindOptions};
use pdmsym::zero::{random_param, rng_for};
use pdmsym::{expand_generators, parse_expr, parse_operator, DiffOp, Expr, Generator, Hamiltonian, Policy, Scalar};

struct Outcome {
    pass: bool,
    detail: String,
    /// Recorded expectation holds (true for a PASS, or for a FAIL with the
    /// documented defect set).
    as_recorded: bool,
    elapsed: Duration,
    limit: Duration,
}

fn op(s: &str) -> DiffOp {
    expand_generators(&parse_operator(s).unwrap()).unwrap()
}

fn e(s: &str) -> Expr {
    parse_expr(s).unwrap()
}

fn exact_zero(d: &DiffOp) -> bool {
    d.simplified().zero_certificate(&Policy::default()).is_ok_and(|c| c.is_exact_zero())
}

fn killing_suite() -> (bool, String, bool) {
    let policy = Policy::default();
    let mut rng = rng_for(0x4b11);
    let mut failures = Vec::new();
    for n in 1..=9u8 {
        let names = family_params(n).unwrap();
        let sym = family_symbolic(n).unwrap();
        for draw in 0..5 {
            let vals: BTreeMap<String, Scalar> = names.iter().map(|k| (k.clone(), random_param(&mut rng))).collect();
            let mu = bind_tensor(&sym, &vals);
            if !check_killing_identity(&mu, &policy).unwrap().is_exact_zero() {
                failures.push(format!("{n}/{draw}"));
            }
        }
    }
    let literal_fails = !check_killing_identity(&family_six_as_printed(), &policy).unwrap().is_zero();
    let pass = failures.is_empty();
    let detail = if pass {
        "9 families x 5 draws ExactZero (family 6 with x^a lambda^{bc} x^c; the literal x^2 form is not Killing)".into()
    } else {
        format!("not Killing: {failures:?}")
    };
    (pass, detail, pass && literal_fails)
}

fn algebra_suite() -> (bool, String, bool) {
    let policy = Policy::default();
    let gens = Generator::all();
    let mut closed = 0;
    for a in gens {
        for b in gens {
            let c = a.op().commutator(&b.op()).unwrap().simplified();
            if recognize_generators(&c, &policy).is_some() {
                closed += 1;
            }
        }
    }
    let mut exact = true;
    for a in 1..=3u8 {
        let lhs = op("D").commutator(&op(&format!("P{a}"))).unwrap();
        exact &= exact_zero(&lhs.sub(&op(&format!("i*P{a}"))));
        for b in 1..=3u8 {
            let lhs = op(&format!("P{a}")).commutator(&op(&format!("K{b}"))).unwrap();
            let mut rhs = if a == b { op("2*i*D") } else { DiffOp::zero() };
            for c in 1..=3u8 {
                let eps = pdmsym::killing::levi(a as usize, b as usize, c as usize);
                if eps != 0 {
                    rhs = rhs.sub(&op(&format!("{}*i*L{c}", 2 * eps)));
                }
            }
            exact &= exact_zero(&lhs.sub(&rhs));
        }
    }
    let pass = closed == 100 && exact;
    (pass, format!("{closed}/100 brackets recognized, structure identities exact: {exact}"), pass)
}

/// `P_c x_a x_b P_c`.
fn q_tensor(a: usize, b: usize) -> DiffOp {
    let mut acc = DiffOp::zero();
    for c in 1..=3u8 {
        let p = Generator::P(c).op();
        let mid = DiffOp::scalar(&Expr::coord(a) * &Expr::coord(b));
        acc = acc.add(&p.compose(&mid).unwrap().compose(&p).unwrap());
    }
    acc
}

fn identity_suite() -> (bool, String, bool) {
    let mut printed = Vec::new();
    for (a, b) in [(1, 2), (1, 3), (2, 3), (2, 1)] {
        let lhs = op(&format!("{{L{a},L{b}}} + {{P{a},K{b}}}"));
        printed.push(exact_zero(&lhs.sub(&q_tensor(a, b).scale_const(&Scalar::from(2)))));
    }
    let lhs = op("{P1,K1} + {P2,K2} + L3^2");
    let third = exact_zero(&lhs.sub(&q_tensor(3, 3).scale_const(&Scalar::from(2))));
    let pass = printed.iter().all(|&z| z) && third;
    let fixed_ab = exact_zero(&op("{L1,L2} + 1/2*{P1,K2} + 1/2*{P2,K1}").add(&q_tensor(1, 2).scale_const(&Scalar::from(2))));
    let fixed_33 = exact_zero(&op("L1^2 + L2^2 - 1/2*{P3,K3} + 3/2").sub(&q_tensor(3, 3)));
    let detail = format!(
        "printed off-diagonal identity zero for (12,13,23,21): {printed:?}; printed diagonal identity zero: {third}; \
         verified forms {{L1,L2}} + ({{P1,K2}}+{{P2,K1}})/2 = -2Q^12: {fixed_ab}, L1^2 + L2^2 - {{P3,K3}}/2 = Q^33 - 3/2: {fixed_33}"
    );
    let recorded = !pass && printed.iter().all(|&z| !z) && !third && fixed_ab && fixed_33;
    (pass, detail, recorded)
}

fn determinant_suite() -> (bool, String, bool) {
    let policy = Policy::default();
    let zero = |c: BranchCondition| branch_determinant_check(c, &policy).unwrap().is_exact_zero();
    let linear: Vec<bool> = BranchCondition::linear().into_iter().map(zero).collect();
    let bilinear: Vec<bool> = BranchCondition::bilinear().into_iter().map(zero).collect();
    let derived: Vec<bool> = (1..=5).map(|k| zero(BranchCondition::DerivedCombination(k))).collect();
    let generic: Vec<bool> = [Branch::Linear, Branch::Bilinear]
        .into_iter()
        .map(|b| {
            let c = branch_determinant_check(BranchCondition::Generic(b), &policy).unwrap();
            matches!(c, pdmsym::ZeroCertificate::NonZero { .. })
        })
        .collect();
    let pass = linear.iter().chain(&bilinear[..6]).all(|&z| z) && generic.iter().all(|&g| g);
    let detail = format!(
        "linear conditions (printed order) det=0: {linear:?}; bilinear combinations 1-5, worked case, three-term det=0: {bilinear:?}; \
         derived-N combinations det=0: {derived:?}; generic NonZero: {generic:?}"
    );
    let recorded = !pass
        && linear == [true, true, false, false, true, false]
        && bilinear == [false, false, false, false, false, false, true]
        && derived == [true, false, false, true, true]
        && generic == [true, true];
    (pass, detail, recorded)
}

const ANCHOR_DEFECTS: [&str; 6] = ["T1.1", "T1.2", "T1.5", "T1.7", "T2.1", "T2.8"];

fn anchor_suite() -> (bool, String, bool) {
    let rows = builtin_catalog();
    let policy = Policy::default();
    let mut failing = BTreeSet::new();
    let mut confirmed = true;
    for &(t, i) in &ANCHOR_ROWS {
        let row = find_row(&rows, t, i).unwrap();
        for b in binding_suite(row, policy.seed) {
            let rep = verify_row(row, &b, &policy);
            if !rep.all_verified() {
                failing.insert(rep.id.clone());
            }
            for ir in &rep.integrals {
                if let Verdict::Discrepant { symbolic, numeric, .. } = &ir.verdict {
                    confirmed &= *symbolic != Some(false) && !numeric.is_zero();
                } else {
                    confirmed &= ir.verdict.is_verified();
                }
            }
        }
    }
    let pass = failing.is_empty();
    let detail = format!(
        "{}/{} anchor rows verified; Discrepant (dual-confirmed: {confirmed}): {failing:?}",
        ANCHOR_ROWS.len() - failing.len(),
        ANCHOR_ROWS.len()
    );
    let recorded = confirmed && failing.iter().map(String::as_str).eq(ANCHOR_DEFECTS);
    (pass, detail, recorded)
}

fn full_catalog_suite() -> (bool, String, bool) {
    let rows = builtin_catalog();
    let policy = Policy::default();
    let rep = verify_catalog(&rows, &policy);
    let explained = rep.reports.iter().all(|r| r.explained());
    let equivalence = rep.reports.iter().all(|r| r.equivalence_holds());
    let homogeneous = rep
        .reports
        .iter()
        .filter(|r| r.skipped.is_none())
        .all(|r| r.homogeneity.as_ref().is_some_and(|c| c.is_zero()) && r.scale_invariance.as_ref().is_some_and(|c| c.is_zero()));
    let skip_ok = rep
        .reports
        .iter()
        .filter(|r| r.id == "T1.11")
        .all(|r| r.skipped.as_ref().is_some_and(|s| s.a_equals_b.as_ref().is_some_and(|c| c.is_zero()) && !s.compatibility_pde.is_empty()));
    let dual = rep.reports.iter().flat_map(|r| &r.integrals).all(|i| match &i.verdict {
        Verdict::Discrepant { symbolic, numeric, .. } => *symbolic != Some(false) && !numeric.is_zero(),
        _ => true,
    });
    let live: Vec<_> = rows.iter().filter(|r| !r.is_skipped()).collect();
    let mut negatives = 0;
    let mut negatives_ok = 0;
    for n in 0..50 {
        let row = live[n % live.len()];
        let b = &binding_suite(row, policy.seed)[n % 3];
        let out = perturbation_check(row, b, n, &policy).unwrap();
        negatives += 1;
        if !out.commutator_zero && !out.residuals_zero {
            negatives_ok += 1;
        }
    }
    let non_anchor_ok = rep.reports.iter().filter(|r| !is_anchor(r.table, r.item)).all(|r| r.explained());
    let pass = explained && equivalence && homogeneous && skip_ok && dual && negatives_ok == negatives && non_anchor_ok;
    let s = &rep.summary;
    let detail = format!(
        "{} reports: {} verified, {} discrepant, {} skipped, {} unresolved; dual confirmation {dual}; equivalence {equivalence}; \
         homogeneity and [D,H]=0 {homogeneous}; skipped row with compatibility PDE and a=b check {skip_ok}; negatives rejected {negatives_ok}/{negatives}",
        s.rows, s.verified, s.discrepant, s.skipped, s.unresolved
    );
    (pass, detail, pass)
}

fn rediscovery_suite() -> (bool, String, bool) {
    let policy = Policy::default();
    let opts = FindOptions::default();
    let sound = |found: &[pdmsym::solve::FoundIntegral], h: &Hamiltonian| {
        found.iter().all(|q| match q.operator() {
            Some(o) => h.to_diffop().commutator(&o).unwrap().zero_certificate(&policy).unwrap().is_zero(),
            None => q.certificate.is_zero(),
        })
    };

    let h1 = Hamiltonian::new(e("r^2"), e("c*r^2/x3^2"));
    let found1 = find_integrals(&h1.f, &h1.v, &[2], &opts).unwrap();
    let printed = op("{L1,L2} + 4*c*x1*x2/x3^2");
    let item1 = span_contains(&found1, &h1, &printed, &policy);
    let item1_principal = span_contains_principal(&found1, &h1, &printed, &policy);
    let item1_fixed = span_contains(&found1, &h1, &op("{L1,L2} - 2*c*x1*x2/x3^2"), &policy);

    let h8 = Hamiltonian::new(e("x3^2"), e("c*x3^2/x1^2"));
    let found8 = find_integrals(&h8.f, &h8.v, &[0, 1, 2], &opts).unwrap();
    let listed = ["{L3,P1} + 4*c*x2/x1^2", "{L3,K1} + 4*c*x2*r^2/x1^2", "{P1,K1} + 4*c*r^2/x1^2", "P2", "K2"];
    let mut exact = Vec::new();
    let mut principal = Vec::new();
    for src in listed {
        let q = op(src);
        let target = if q.order() == 1 { q.compose(&q).unwrap() } else { q };
        exact.push(span_contains(&found8, &h8, &target, &policy));
        principal.push(span_contains_principal(&found8, &h8, &target, &policy));
    }
    let n_exact = exact.iter().filter(|&&b| b).count();
    let n_principal = principal.iter().filter(|&&b| b).count();
    let soundness = sound(&found1, &h1) && sound(&found8, &h8);
    let pass = item1 && n_exact >= 3 && soundness;
    let detail = format!(
        "f=r^2: {} integrals, printed {{L1,L2}} integral contained: {item1} (principal part: {item1_principal}, with -2c: {item1_fixed}); \
         f=x3^2: {} integrals, listed integrals contained {n_exact}/5 {exact:?}, by principal part {n_principal}/5; soundness {soundness}",
        found1.len(),
        found8.len()
    );
    let recorded = !pass
        && !item1
        && item1_principal
        && item1_fixed
        && exact == [false, false, false, true, false]
        && principal == [true, false, true, true, false]
        && soundness;
    (pass, detail, recorded)
}

fn inversion_suite() -> (bool, String, bool) {
    let rows = builtin_catalog();
    let policy = Policy::default();
    let ids = [(1, 2), (1, 3), (1, 4), (2, 4), (2, 5), (2, 6), (2, 7), (2, 8), (2, 11), (2, 12)];
    let mut holding = Vec::new();
    let mut failing = Vec::new();
    for (t, i) in ids {
        let row = find_row(&rows, t, i).unwrap();
        let b = &binding_suite(row, policy.seed)[0];
        let rep = verify_row(row, b, &policy);
        for p in &rep.inversion_pairs {
            let tag = format!("{}[{}->{}]", rep.id, p.p, p.k);
            if p.holds() {
                holding.push(format!("{tag}:{}", p.sign.as_deref().unwrap_or("?")));
            } else {
                failing.push(tag);
            }
        }
    }
    // U({P3,D} - c/r) = -{K3,D} - c r is an integral, so the sign of the D product is the defect
    let row = find_row(&rows, 1, 2).unwrap();
    let b = pdmsym::catalog::Binding {
        slots: [("F".to_string(), Expr::one()), ("G".to_string(), Expr::zero())].into(),
        params: [("c".to_string(), Scalar::from(1))].into(),
    };
    let inst = pdmsym::catalog::instantiate(row, &b).unwrap();
    let image = pdmsym::inversion_conjugate(&op("{P3,D} - 1/r")).unwrap();
    let image_commutes = inst.hamiltonian.to_diffop().commutator(&image).unwrap().zero_certificate(&policy).unwrap().is_zero();
    let image_is_minus = decompose(&image, &[op("{K3,D} + r")], &policy).is_some_and(|d| d.coefficients[0] == Scalar::from(-1));
    let pass = failing.is_empty();
    let detail = format!("pairs mapping onto partner {holding:?}; not mapping {failing:?}; U({{P3,D}} - c/r) = -({{K3,D}} + c r) commuting: {}", image_commutes && image_is_minus);
    let recorded = !pass
        && image_commutes
        && image_is_minus
        && failing
            == [
                "T1.2[0->1]",
                "T1.3[1->2]",
                "T2.4[0->1]",
                "T2.5[0->2]",
                "T2.6[0->2]",
                "T2.11[0->1]",
                "T2.12[0->1]",
            ];
    (pass, detail, recorded)
}

fn timed(limit_s: u64, f: fn() -> (bool, String, bool)) -> Outcome {
    let t = Instant::now();
    let (pass, detail, as_recorded) = f();
    Outcome {
        pass,
        detail,
        as_recorded,
        elapsed: t.elapsed(),
        limit: Duration::from_secs(limit_s),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        for n in 1..=8 {
            println!("criterion_{n}: test");
        }
        return ExitCode::SUCCESS;
    }
    let suites: [(u64, fn() -> (bool, String, bool)); 8] = [
        (30, killing_suite),
        (30, algebra_suite),
        (60, identity_suite),
        (60, determinant_suite),
        (300, anchor_suite),
        (900, full_catalog_suite),
        (300, rediscovery_suite),
        (300, inversion_suite),
    ];
    let mut unexpected = Vec::new();
    for (k, (limit, f)) in suites.into_iter().enumerate() {
        let o = timed(limit, f);
        let in_time = o.elapsed <= o.limit;
        let verdict = if o.pass && in_time { "PASS" } else { "FAIL" };
        println!("criterion {}: {verdict} ({:.1}s) {}", k + 1, o.elapsed.as_secs_f64(), o.detail);
        if !o.as_recorded || !in_time {
            unexpected.push(k + 1);
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: all outcomes match the recorded results");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected outcome for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
