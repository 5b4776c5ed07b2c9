//! Linear systems with expression coefficients, assembled by evaluation at
//! random points.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{digits_to_bits, CFloat, Expr, Geom, Node, RationalPoint};
use crate::linalg::{nullspace, numeric_nullspace, numeric_solve, solve, Matrix};
use crate::scalar::Scalar;
use crate::zero::{random_param, random_point, rng_for};

/// Working precision of the numeric fallback, in decimal digits.
pub const NUMERIC_DIGITS: u32 = 128;

/// One equation: coefficients of the unknowns and the right-hand side.
pub type Cell = (Vec<Expr>, Expr);

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SampleError {
    #[error("transcendental coefficients need the numeric fallback")]
    NeedsNumeric,
    #[error("no admissible sample points within the resampling budget")]
    Budget,
}

#[derive(Clone, Debug)]
pub enum Rows {
    Exact(Matrix, Vec<Scalar>),
    Numeric { a: Vec<Vec<CFloat>>, b: Vec<CFloat>, bits: u32 },
}

/// True when `e` can be evaluated exactly at a [`RationalPoint`].
pub fn exact_evaluable(e: &Expr) -> bool {
    !e.any(&|s| matches!(s.node(), Node::Apply(..) | Node::Geom(Geom::Phi | Geom::Theta)))
}

fn params_of(cells: &[Cell]) -> BTreeSet<String> {
    cells
        .iter()
        .flat_map(|(r, t)| r.iter().chain(std::iter::once(t)))
        .flat_map(|e| e.params())
        .collect()
}

/// Evaluate every cell at `points` random points; parameters are drawn afresh
/// at each point, so solutions hold for all parameter values.
pub fn sample_rows(cells: &[Cell], unknowns: usize, points: usize, seed: u64, allow_numeric: bool) -> Result<Rows, SampleError> {
    let params = params_of(cells);
    let exact = cells
        .iter()
        .all(|(r, t)| exact_evaluable(t) && r.iter().all(exact_evaluable));
    if !exact && !allow_numeric {
        return Err(SampleError::NeedsNumeric);
    }
    let mut rng = rng_for(seed);
    let budget = 10 * points.max(1);
    let mut drawn = 0;
    if exact {
        let mut m = Matrix::zeros(0, unknowns);
        let mut rhs = Vec::new();
        let mut got = 0;
        while got < points {
            let want = points - got;
            if drawn >= budget {
                return Err(SampleError::Budget);
            }
            let batch: Vec<(RationalPoint, BTreeMap<String, Scalar>)> = (0..want)
                .map(|_| {
                    let p = RationalPoint::random(&mut rng);
                    let bind = params.iter().map(|k| (k.clone(), random_param(&mut rng))).collect();
                    (p, bind)
                })
                .collect();
            drawn += want;
            let evaluated: Vec<Option<Vec<(Vec<Scalar>, Scalar)>>> = batch
                .par_iter()
                .map(|(p, bind)| {
                    cells
                        .iter()
                        .map(|(r, t)| {
                            let row: Vec<Scalar> = r.iter().map(|e| e.eval_exact(p, bind)).collect::<Result<_, _>>().ok()?;
                            Some((row, t.eval_exact(p, bind).ok()?))
                        })
                        .collect()
                })
                .collect();
            for rows in evaluated.into_iter().flatten() {
                for (row, tv) in rows {
                    m.push_row(row);
                    rhs.push(tv);
                }
                got += 1;
            }
        }
        Ok(Rows::Exact(m, rhs))
    } else {
        let bits = digits_to_bits(NUMERIC_DIGITS);
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut got = 0;
        let flat: Vec<Expr> = cells
            .iter()
            .flat_map(|(r, t)| r.iter().cloned().chain(std::iter::once(t.clone())))
            .collect();
        let width = unknowns + 1;
        while got < points {
            let want = points - got;
            if drawn >= budget {
                return Err(SampleError::Budget);
            }
            let batch: Vec<_> = (0..want)
                .map(|_| {
                    let p = random_point(&mut rng, NUMERIC_DIGITS);
                    let bind: BTreeMap<String, Scalar> = params.iter().map(|k| (k.clone(), random_param(&mut rng))).collect();
                    (p, bind)
                })
                .collect();
            drawn += want;
            let evaluated: Vec<Option<Vec<CFloat>>> = batch
                .par_iter()
                .map(|(p, bind)| Expr::eval_many(&flat, p, bind).ok())
                .collect();
            for vals in evaluated.into_iter().flatten() {
                for chunk in vals.chunks(width) {
                    a.push(chunk[..unknowns].to_vec());
                    b.push(chunk[unknowns].clone());
                }
                got += 1;
            }
        }
        Ok(Rows::Numeric { a, b, bits })
    }
}

impl Rows {
    pub fn solve(&self, unknowns: usize) -> Option<Vec<Scalar>> {
        match self {
            Rows::Exact(m, rhs) => solve(m, rhs),
            Rows::Numeric { a, b, bits } => numeric_solve(a, b, unknowns, *bits),
        }
    }

    pub fn nullspace(&self, unknowns: usize) -> Option<Vec<Vec<Scalar>>> {
        match self {
            Rows::Exact(m, _) => Some(nullspace(m)),
            Rows::Numeric { a, bits, .. } => numeric_nullspace(a, unknowns, *bits),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Rows::Exact(..))
    }
}
