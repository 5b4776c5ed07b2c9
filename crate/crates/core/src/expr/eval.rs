//! High-precision complex evaluation at sample points.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rug::{Float, Rational};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Expr, Func, Geom, Node};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("unbound parameter `{0}`")]
    UnboundParam(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid point: {0}")]
    InvalidPoint(String),
}

/// Working precision in bits for a number of decimal digits, with guard bits.
pub fn digits_to_bits(digits: u32) -> u32 {
    (digits as f64 * std::f64::consts::LOG2_10).ceil() as u32 + 64
}

/// A sample point in the open positive box, with a working precision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    #[serde(with = "rational_triple")]
    pub coords: [Rational; 3],
    /// Decimal digits, at least 32.
    pub precision: u32,
}

mod rational_triple {
    use rug::Rational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rational; 3], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|q| q.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[Rational; 3], D::Error> {
        let v: Vec<String> = Vec::deserialize(d)?;
        if v.len() != 3 {
            return Err(serde::de::Error::custom("expected three coordinates"));
        }
        let parse = |s: &str| {
            s.parse::<Rational>()
                .map_err(|e| serde::de::Error::custom(format!("bad rational {s}: {e}")))
        };
        Ok([parse(&v[0])?, parse(&v[1])?, parse(&v[2])?])
    }
}

impl Point {
    pub fn new(coords: [Rational; 3], precision: u32) -> Result<Point, EvalError> {
        if precision < 32 {
            return Err(EvalError::InvalidPoint(format!(
                "precision {precision} below 32 digits"
            )));
        }
        let lo = Rational::from((1, 2));
        let hi = Rational::from(2);
        for c in &coords {
            if *c < lo || *c > hi {
                return Err(EvalError::InvalidPoint(format!(
                    "coordinate {c} outside [1/2, 2]"
                )));
            }
        }
        Ok(Point { coords, precision })
    }

    pub fn from_ratios(c: [(i64, i64); 3], precision: u32) -> Result<Point, EvalError> {
        Point::new(c.map(|(n, d)| Rational::from((n, d))), precision)
    }

    /// Working precision in bits, with guard bits on top of the requested digits.
    pub fn bits(&self) -> u32 {
        digits_to_bits(self.precision)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {})",
            self.coords[0], self.coords[1], self.coords[2]
        )
    }
}

/// Complex multiprecision value.
#[derive(Clone, Debug)]
pub struct CFloat {
    pub re: Float,
    pub im: Float,
}

impl CFloat {
    pub fn zero(prec: u32) -> CFloat {
        CFloat {
            re: Float::new(prec),
            im: Float::new(prec),
        }
    }

    pub fn real(re: Float) -> CFloat {
        let prec = re.prec();
        CFloat {
            re,
            im: Float::new(prec),
        }
    }

    pub fn from_scalar(s: &Scalar, prec: u32) -> CFloat {
        CFloat {
            re: Float::with_val(prec, &s.re),
            im: Float::with_val(prec, &s.im),
        }
    }

    pub fn prec(&self) -> u32 {
        self.re.prec()
    }

    pub fn abs(&self) -> Float {
        Float::with_val(self.prec(), self.re.hypot_ref(&self.im))
    }

    pub fn add(&self, o: &CFloat) -> CFloat {
        let p = self.prec();
        CFloat {
            re: Float::with_val(p, &self.re + &o.re),
            im: Float::with_val(p, &self.im + &o.im),
        }
    }

    pub fn sub(&self, o: &CFloat) -> CFloat {
        let p = self.prec();
        CFloat {
            re: Float::with_val(p, &self.re - &o.re),
            im: Float::with_val(p, &self.im - &o.im),
        }
    }

    pub fn mul(&self, o: &CFloat) -> CFloat {
        let p = self.prec();
        if self.im.is_zero() && o.im.is_zero() {
            return CFloat::real(Float::with_val(p, &self.re * &o.re));
        }
        let re = Float::with_val(p, &self.re * &o.re) - Float::with_val(p, &self.im * &o.im);
        let im = Float::with_val(p, &self.re * &o.im) + Float::with_val(p, &self.im * &o.re);
        CFloat { re, im }
    }

    pub fn neg(&self) -> CFloat {
        CFloat {
            re: Float::with_val(self.prec(), -&self.re),
            im: Float::with_val(self.prec(), -&self.im),
        }
    }

    /// Reciprocal; fails when |z| is below the working-precision noise floor.
    pub fn recip(&self) -> Result<CFloat, EvalError> {
        let p = self.prec();
        let n = Float::with_val(p, self.re.square_ref()) + Float::with_val(p, self.im.square_ref());
        let floor = Float::with_val(p, Float::i_exp(1, -(p as i32)));
        if n <= floor {
            return Err(EvalError::Domain("division by zero".into()));
        }
        Ok(CFloat {
            re: Float::with_val(p, &self.re / &n),
            im: Float::with_val(p, -Float::with_val(p, &self.im / &n)),
        })
    }

    pub fn powi(&self, n: i64) -> Result<CFloat, EvalError> {
        let base = if n < 0 { self.recip()? } else { self.clone() };
        let mut e = n.unsigned_abs();
        let mut acc = CFloat::real(Float::with_val(self.prec(), 1));
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

    fn is_negative_real_axis(&self) -> bool {
        let tiny = Float::with_val(self.prec(), Float::i_exp(1, -(self.prec() as i32) / 2));
        let scale = self.abs();
        Float::with_val(self.prec(), self.im.abs_ref()) <= Float::with_val(self.prec(), &tiny * &scale)
            && self.re <= 0
    }

    pub fn apply(&self, func: Func) -> Result<CFloat, EvalError> {
        let p = self.prec();
        let (a, b) = (&self.re, &self.im);
        Ok(match func {
            Func::Exp => {
                let m = Float::with_val(p, a.exp_ref());
                let (s, c) = b.clone().sin_cos(Float::new(p));
                CFloat {
                    re: Float::with_val(p, &m * &c),
                    im: Float::with_val(p, &m * &s),
                }
            }
            Func::Sin => {
                let (s, c) = a.clone().sin_cos(Float::new(p));
                let (sh, ch) = b.clone().sinh_cosh(Float::new(p));
                CFloat {
                    re: Float::with_val(p, &s * &ch),
                    im: Float::with_val(p, &c * &sh),
                }
            }
            Func::Cos => {
                let (s, c) = a.clone().sin_cos(Float::new(p));
                let (sh, ch) = b.clone().sinh_cosh(Float::new(p));
                CFloat {
                    re: Float::with_val(p, &c * &ch),
                    im: Float::with_val(p, -Float::with_val(p, &s * &sh)),
                }
            }
            Func::Ln => {
                if self.is_negative_real_axis() {
                    return Err(EvalError::Domain("ln of a non-positive value".into()));
                }
                CFloat {
                    re: self.abs().ln(),
                    im: Float::with_val(p, b.atan2_ref(a)),
                }
            }
            Func::Sqrt => {
                if self.re < 0 && self.is_negative_real_axis() {
                    return Err(EvalError::Domain("sqrt of a negative value".into()));
                }
                let m = self.abs().sqrt();
                let half = Float::with_val(p, b.atan2_ref(a)) / 2u32;
                let (s, c) = half.sin_cos(Float::new(p));
                CFloat {
                    re: Float::with_val(p, &m * &c),
                    im: Float::with_val(p, &m * &s),
                }
            }
        })
    }

    pub fn to_f64_pair(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }

    /// log10 |z|, or -inf at exact zero.
    pub fn log10_abs(&self) -> f64 {
        let a = self.abs();
        if a.is_zero() {
            f64::NEG_INFINITY
        } else {
            a.log10().to_f64()
        }
    }
}

impl fmt::Display for CFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (re, im) = self.to_f64_pair();
        write!(f, "{re:e}{:+e}i", im)
    }
}

/// Precomputed coordinate-derived atoms at one point.
struct Frame {
    x: [CFloat; 3],
    r: CFloat,
    rt: CFloat,
    phi: CFloat,
    theta: CFloat,
    prec: u32,
}

impl Frame {
    fn new(p: &Point) -> Frame {
        let prec = p.bits();
        let xs = p.coords.clone().map(|c| Float::with_val(prec, c));
        let rt = Float::with_val(prec, xs[0].hypot_ref(&xs[1]));
        let r = Float::with_val(prec, rt.hypot_ref(&xs[2]));
        let phi = Float::with_val(prec, xs[1].atan2_ref(&xs[0]));
        let theta = Float::with_val(prec, rt.atan2_ref(&xs[2]));
        Frame {
            x: xs.map(CFloat::real),
            r: CFloat::real(r),
            rt: CFloat::real(rt),
            phi: CFloat::real(phi),
            theta: CFloat::real(theta),
            prec,
        }
    }
}

impl Expr {
    /// Evaluate at `p`; every parameter must be bound.
    pub fn eval(&self, p: &Point, bindings: &BTreeMap<String, Scalar>) -> Result<CFloat, EvalError> {
        let frame = Frame::new(p);
        let mut memo = HashMap::new();
        eval_memo(self, &frame, bindings, &mut memo)
    }

    /// Evaluate several expressions at one point, sharing common subtrees.
    pub fn eval_many(
        exprs: &[Expr],
        p: &Point,
        bindings: &BTreeMap<String, Scalar>,
    ) -> Result<Vec<CFloat>, EvalError> {
        let frame = Frame::new(p);
        let mut memo = HashMap::new();
        exprs
            .iter()
            .map(|e| eval_memo(e, &frame, bindings, &mut memo))
            .collect()
    }
}

fn eval_memo(
    e: &Expr,
    fr: &Frame,
    bindings: &BTreeMap<String, Scalar>,
    memo: &mut HashMap<Expr, CFloat>,
) -> Result<CFloat, EvalError> {
    if let Some(v) = memo.get(e) {
        return Ok(v.clone());
    }
    let v = match e.node() {
        Node::Const(c) => CFloat::from_scalar(c, fr.prec),
        Node::Coord(a) => fr.x[*a as usize - 1].clone(),
        Node::Geom(g) => match g {
            Geom::R => fr.r.clone(),
            Geom::Rt => fr.rt.clone(),
            Geom::Phi => fr.phi.clone(),
            Geom::Theta => fr.theta.clone(),
        },
        Node::Param(name) => match bindings.get(&**name) {
            Some(s) => CFloat::from_scalar(s, fr.prec),
            None => return Err(EvalError::UnboundParam(name.to_string())),
        },
        Node::Sum(v) => {
            let mut acc = CFloat::zero(fr.prec);
            for t in v {
                acc = acc.add(&eval_memo(t, fr, bindings, memo)?);
            }
            acc
        }
        Node::Product(v) => {
            let mut acc = CFloat::real(Float::with_val(fr.prec, 1));
            for t in v {
                acc = acc.mul(&eval_memo(t, fr, bindings, memo)?);
            }
            acc
        }
        Node::Pow(b, n) => eval_memo(b, fr, bindings, memo)?.powi(*n)?,
        Node::Apply(f, a) => eval_memo(a, fr, bindings, memo)?.apply(*f)?,
    };
    memo.insert(e.clone(), v.clone());
    Ok(v)
}
