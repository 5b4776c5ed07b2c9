//! Zero certificates: exact by normal form where possible, otherwise by
//! high-precision evaluation at random points of the sampling box.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::Rational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{CFloat, EvalError, Expr, Point};
use crate::normal::normalize;
use crate::scalar::Scalar;

pub const DEFAULT_POINTS: usize = 20;
pub const DEFAULT_PRECISION: u32 = 64;
pub const DEFAULT_THRESHOLD: u32 = 40;
pub const DEFAULT_SEED: u64 = 0x5CA1_E1A7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    pub points: usize,
    /// Decimal digits.
    pub precision: u32,
    /// Residuals below `10^-threshold` count as zero.
    pub threshold: u32,
    pub seed: u64,
}

impl Default for Policy {
    fn default() -> Self {
        Policy {
            points: DEFAULT_POINTS,
            precision: DEFAULT_PRECISION,
            threshold: DEFAULT_THRESHOLD,
            seed: DEFAULT_SEED,
        }
    }
}

impl Policy {
    pub fn with_seed(self, seed: u64) -> Policy {
        Policy { seed, ..self }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum ZeroCertificate {
    ExactZero,
    ProbablyZero {
        points: usize,
        precision: u32,
        /// log10 of the largest residual modulus (`-inf` serialises as null).
        max_residual_log10: Option<f64>,
    },
    NonZero {
        witness: Point,
        /// Sampled parameter values at the witness.
        params: BTreeMap<String, String>,
        residual: String,
        residual_log10: f64,
        /// Index of the failing component when certifying several expressions.
        component: usize,
        /// Decided by normal form rather than by sampling alone.
        exact: bool,
    },
}

impl ZeroCertificate {
    pub fn is_zero(&self) -> bool {
        !matches!(self, ZeroCertificate::NonZero { .. })
    }

    pub fn is_exact_zero(&self) -> bool {
        matches!(self, ZeroCertificate::ExactZero)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ZeroError {
    #[error("evaluation failed at every sample within the resampling budget: {0}")]
    BudgetExhausted(EvalError),
}

/// SplitMix64 step; used to derive independent task seeds.
pub fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a named sub-task of `root`.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix(root ^ h)
}

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random point with coordinates `n/q`, `q` in `[8, 64]`, inside `[1/2, 2]`.
pub fn random_point<R: Rng>(rng: &mut R, precision: u32) -> Point {
    let coords = [0; 3].map(|_| {
        let q: i64 = rng.gen_range(8..=64);
        let n: i64 = rng.gen_range((q + 1) / 2..=2 * q);
        Rational::from((n, q))
    });
    Point { coords, precision }
}

/// Random nonzero rational in `[-3, 3]` with denominator at most 64.
pub fn random_param<R: Rng>(rng: &mut R) -> Scalar {
    loop {
        let q: i64 = rng.gen_range(1..=64);
        let n: i64 = rng.gen_range(-3 * q..=3 * q);
        if n != 0 {
            return Scalar::ratio(n, q);
        }
    }
}

pub fn zero_certificate(e: &Expr, policy: &Policy) -> Result<ZeroCertificate, ZeroError> {
    certify_all(std::slice::from_ref(e), policy)
}

/// One certificate for a family of expressions that must all vanish.
pub fn certify_all(exprs: &[Expr], policy: &Policy) -> Result<ZeroCertificate, ZeroError> {
    let live: Vec<(usize, &Expr)> = exprs.iter().enumerate().filter(|(_, e)| !e.is_zero()).collect();
    if live.is_empty() {
        return Ok(ZeroCertificate::ExactZero);
    }
    let mut exact_nonzero: Option<usize> = None;
    let mut all_exact = true;
    for (i, e) in &live {
        match normalize(e) {
            Ok(n) if n.is_zero() => {}
            Ok(n) if !n.has_kernel() => {
                exact_nonzero = Some(*i);
                all_exact = false;
                break;
            }
            _ => all_exact = false,
        }
    }
    if all_exact {
        return Ok(ZeroCertificate::ExactZero);
    }
    let targets: Vec<(usize, Expr)> = match exact_nonzero {
        Some(i) => vec![(i, exprs[i].clone())],
        None => live.iter().map(|(i, e)| (*i, (*e).clone())).collect(),
    };
    sample(&targets, policy, exact_nonzero.is_some())
}

fn sample(
    targets: &[(usize, Expr)],
    policy: &Policy,
    exact_nonzero: bool,
) -> Result<ZeroCertificate, ZeroError> {
    let params: Vec<String> = targets
        .iter()
        .flat_map(|(_, e)| e.params())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let exprs: Vec<Expr> = targets.iter().map(|(_, e)| e.clone()).collect();
    let mut rng = rng_for(policy.seed);
    let budget = policy.points.max(1) * 10;
    let mut used = 0usize;
    let mut attempts = 0usize;
    let mut worst: Option<(f64, CFloat, usize, Point, BTreeMap<String, Scalar>)> = None;
    let mut last_err = None;
    while used < policy.points.max(1) {
        if attempts >= budget {
            return Err(ZeroError::BudgetExhausted(last_err.expect("failed attempt")));
        }
        attempts += 1;
        let p = random_point(&mut rng, policy.precision);
        let bindings: BTreeMap<String, Scalar> =
            params.iter().map(|n| (n.clone(), random_param(&mut rng))).collect();
        let values = match Expr::eval_many(&exprs, &p, &bindings) {
            Ok(v) => v,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        used += 1;
        for (k, v) in values.into_iter().enumerate() {
            let l = v.log10_abs();
            if worst.as_ref().map_or(true, |w| l > w.0) {
                worst = Some((l, v, targets[k].0, p.clone(), bindings.clone()));
            }
        }
    }
    let (l, v, component, witness, bindings) = worst.expect("at least one point");
    if exact_nonzero || l >= -(policy.threshold as f64) {
        return Ok(ZeroCertificate::NonZero {
            witness,
            params: bindings.iter().map(|(k, s)| (k.clone(), s.to_string())).collect(),
            residual: v.to_string(),
            residual_log10: l,
            component,
            exact: exact_nonzero,
        });
    }
    Ok(ZeroCertificate::ProbablyZero {
        points: used,
        precision: policy.precision,
        max_residual_log10: l.is_finite().then_some(l),
    })
}
