//! Exact linear algebra over the Gaussian rationals.
//!
//! Elimination is fraction-free (Bareiss) on rows scaled to Gaussian
//! integers. A floating fallback with rational reconstruction is provided for
//! systems whose entries are only known numerically.

use rug::float::Round;
use rug::{Float, Integer, Rational};

use crate::expr::CFloat;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Scalar>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![Scalar::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<Scalar>>) -> Matrix {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged matrix");
        Matrix {
            rows: rows.len(),
            cols,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> &Scalar {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Scalar) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Scalar] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn push_row(&mut self, row: Vec<Scalar>) {
        if self.rows == 0 && self.cols == 0 {
            self.cols = row.len();
        }
        assert_eq!(row.len(), self.cols);
        self.data.extend(row);
        self.rows += 1;
    }

    pub fn mul_vec(&self, v: &[Scalar]) -> Vec<Scalar> {
        (0..self.rows)
            .map(|i| {
                let mut acc = Scalar::zero();
                for (a, b) in self.row(i).iter().zip(v) {
                    if !a.is_zero() && !b.is_zero() {
                        acc += &(a * b);
                    }
                }
                acc
            })
            .collect()
    }
}

/// Gaussian integer `re + i im`.
#[derive(Clone, Debug, PartialEq, Eq)]
struct GInt {
    re: Integer,
    im: Integer,
}

impl GInt {
    fn is_zero(&self) -> bool {
        self.re == 0 && self.im == 0
    }

    fn mul(&self, o: &GInt) -> GInt {
        GInt {
            re: Integer::from(&self.re * &o.re) - Integer::from(&self.im * &o.im),
            im: Integer::from(&self.re * &o.im) + Integer::from(&self.im * &o.re),
        }
    }

    fn sub(&self, o: &GInt) -> GInt {
        GInt {
            re: Integer::from(&self.re - &o.re),
            im: Integer::from(&self.im - &o.im),
        }
    }

    /// Exact division; the Bareiss invariant guarantees divisibility.
    fn div_exact(&self, d: &GInt) -> GInt {
        if d.im == 0 {
            return GInt {
                re: Integer::from(self.re.div_exact_ref(&d.re)),
                im: Integer::from(self.im.div_exact_ref(&d.re)),
            };
        }
        let n = Integer::from(&d.re * &d.re) + Integer::from(&d.im * &d.im);
        let conj = GInt {
            re: d.re.clone(),
            im: Integer::from(-&d.im),
        };
        let p = self.mul(&conj);
        GInt {
            re: p.re.div_exact(&n),
            im: p.im.div_exact(&n),
        }
    }

    fn to_scalar(&self) -> Scalar {
        Scalar::new(Rational::from(&self.re), Rational::from(&self.im))
    }
}

fn integral_row(row: &[Scalar]) -> Vec<GInt> {
    let mut l = Integer::from(1);
    for s in row {
        l.lcm_mut(&s.denominator_lcm());
    }
    row.iter()
        .map(|s| {
            let re = Rational::from(&s.re * &l);
            let im = Rational::from(&s.im * &l);
            GInt {
                re: re.numer().clone(),
                im: im.numer().clone(),
            }
        })
        .collect()
}

/// Row echelon form over Z[i] with pivot columns.
fn bareiss(m: &Matrix) -> (Vec<Vec<GInt>>, Vec<usize>) {
    let mut a: Vec<Vec<GInt>> = (0..m.rows).map(|i| integral_row(m.row(i))).collect();
    let mut pivots = Vec::new();
    let mut prev = GInt {
        re: Integer::from(1),
        im: Integer::new(),
    };
    let mut r = 0;
    for c in 0..m.cols {
        if r == m.rows {
            break;
        }
        let Some(p) = (r..m.rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(p, r);
        for i in r + 1..m.rows {
            let f = a[i][c].clone();
            for j in c + 1..m.cols {
                let t = a[r][c].mul(&a[i][j]).sub(&f.mul(&a[r][j]));
                a[i][j] = t.div_exact(&prev);
            }
            a[i][c] = GInt {
                re: Integer::new(),
                im: Integer::new(),
            };
        }
        prev = a[r][c].clone();
        pivots.push(c);
        r += 1;
    }
    a.truncate(r);
    (a, pivots)
}

pub fn rank(m: &Matrix) -> usize {
    bareiss(m).1.len()
}

/// Reduced row echelon form and pivot columns.
pub fn rref(m: &Matrix) -> (Matrix, Vec<usize>) {
    let (ech, pivots) = bareiss(m);
    let rows: Vec<Vec<Scalar>> = ech
        .iter()
        .map(|row| row.iter().map(GInt::to_scalar).collect())
        .collect();
    let mut out = Matrix::from_rows(rows);
    if out.rows == 0 {
        out.cols = m.cols;
    }
    for (k, &pc) in pivots.iter().enumerate().rev() {
        let lead = out.get(k, pc).clone();
        for j in 0..m.cols {
            let v = out.get(k, j) / &lead;
            out.set(k, j, v);
        }
        for i in 0..k {
            let f = out.get(i, pc).clone();
            if f.is_zero() {
                continue;
            }
            for j in 0..m.cols {
                let v = out.get(i, j) - &(&f * out.get(k, j));
                out.set(i, j, v);
            }
        }
    }
    (out, pivots)
}

/// Basis of the right nullspace in reduced form: one vector per free column,
/// with a 1 in that column and 0 in the other free columns.
pub fn nullspace(m: &Matrix) -> Vec<Vec<Scalar>> {
    let (red, pivots) = rref(m);
    null_from_rref(&red, &pivots, m.cols)
}

fn null_from_rref(red: &Matrix, pivots: &[usize], cols: usize) -> Vec<Vec<Scalar>> {
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Scalar::zero(); cols];
            v[f] = Scalar::one();
            for (k, &pc) in pivots.iter().enumerate() {
                v[pc] = -red.get(k, f).clone();
            }
            v
        })
        .collect()
}

/// Some solution of `m x = b`, or `None` if inconsistent.
pub fn solve(m: &Matrix, b: &[Scalar]) -> Option<Vec<Scalar>> {
    assert_eq!(b.len(), m.rows);
    let mut aug = Matrix::zeros(0, 0);
    for i in 0..m.rows {
        let mut row = m.row(i).to_vec();
        row.push(b[i].clone());
        aug.push_row(row);
    }
    if m.rows == 0 {
        return Some(vec![Scalar::zero(); m.cols]);
    }
    let (red, pivots) = rref(&aug);
    if pivots.last() == Some(&m.cols) {
        return None;
    }
    let mut x = vec![Scalar::zero(); m.cols];
    for (k, &pc) in pivots.iter().enumerate() {
        x[pc] = red.get(k, m.cols).clone();
    }
    Some(x)
}

/// Determinant by fraction-free elimination.
pub fn det(m: &Matrix) -> Scalar {
    assert_eq!(m.rows, m.cols);
    let mut scale = Scalar::one();
    for i in 0..m.rows {
        let mut l = Integer::from(1);
        for s in m.row(i) {
            l.lcm_mut(&s.denominator_lcm());
        }
        scale = &scale * &Scalar::from(l);
    }
    let (ech, pivots) = bareiss_with_sign(m);
    if pivots < m.rows {
        return Scalar::zero();
    }
    let last = ech.to_scalar();
    &last / &scale
}

fn bareiss_with_sign(m: &Matrix) -> (GInt, usize) {
    let n = m.rows;
    let mut a: Vec<Vec<GInt>> = (0..n).map(|i| integral_row(m.row(i))).collect();
    let mut prev = GInt {
        re: Integer::from(1),
        im: Integer::new(),
    };
    let mut negate = false;
    for k in 0..n {
        let Some(p) = (k..n).find(|&i| !a[i][k].is_zero()) else {
            return (prev, k);
        };
        if p != k {
            a.swap(p, k);
            negate = !negate;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let t = a[k][k].mul(&a[i][j]).sub(&a[i][k].mul(&a[k][j]));
                a[i][j] = t.div_exact(&prev);
            }
        }
        prev = a[k][k].clone();
    }
    if negate {
        prev = GInt {
            re: Integer::from(-&prev.re),
            im: Integer::from(-&prev.im),
        };
    }
    (prev, n)
}

// ---- numeric fallback -----------------------------------------------------

/// Best rational approximation with denominator at most `max_den`, accepted
/// only if it agrees with `x` to within `tol`.
pub fn reconstruct_rational(x: &Float, max_den: &Integer, tol: &Float) -> Option<Rational> {
    let prec = x.prec();
    let negative = *x < 0;
    let mut y = Float::with_val(prec, x.abs_ref());
    // continued fraction convergents h/k
    let (mut h0, mut h1) = (Integer::from(0), Integer::from(1));
    let (mut k0, mut k1) = (Integer::from(1), Integer::from(0));
    let mut best: Option<Rational> = None;
    for _ in 0..200 {
        let a = y.to_integer_round(Round::Down)?.0;
        let h2 = Integer::from(&a * &h1) + &h0;
        let k2 = Integer::from(&a * &k1) + &k0;
        if k2 > *max_den {
            break;
        }
        let cand = Rational::from((h2.clone(), k2.clone()));
        let err = Float::with_val(prec, &y - &a);
        best = Some(cand.clone());
        let diff = Float::with_val(prec, Float::with_val(prec, &cand) - Float::with_val(prec, x.abs_ref()));
        if diff.abs() <= *tol {
            break;
        }
        if err.is_zero() {
            break;
        }
        y = Float::with_val(prec, err.recip());
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
    }
    let q = best?;
    let diff = Float::with_val(prec, Float::with_val(prec, &q) - Float::with_val(prec, x.abs_ref()));
    if diff.abs() > *tol {
        return None;
    }
    Some(if negative { -q } else { q })
}

fn reconstruct_scalar(z: &CFloat, max_den: &Integer, tol: &Float) -> Option<Scalar> {
    Some(Scalar::new(
        reconstruct_rational(&z.re, max_den, tol)?,
        reconstruct_rational(&z.im, max_den, tol)?,
    ))
}

/// Nullspace of a numerically known matrix: Gauss-Jordan with partial
/// pivoting, then rational reconstruction of the reduced basis. Rows are
/// normalised first so the pivot threshold is scale free.
pub fn numeric_nullspace(rows: &[Vec<CFloat>], cols: usize, prec_bits: u32) -> Option<Vec<Vec<Scalar>>> {
    let mut a: Vec<Vec<CFloat>> = rows
        .iter()
        .filter_map(|r| {
            let mut m = Float::new(prec_bits);
            for z in r {
                let v = z.abs();
                if v > m {
                    m = v;
                }
            }
            if m.is_zero() {
                return None;
            }
            let inv = CFloat::real(Float::with_val(prec_bits, m.recip()));
            Some(r.iter().map(|z| z.mul(&inv)).collect())
        })
        .collect();
    let eps = Float::with_val(prec_bits, Float::i_exp(1, -(prec_bits as i32) / 2));
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == a.len() {
            break;
        }
        let (p, best) = (r..a.len())
            .map(|i| (i, a[i][c].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        if best <= eps {
            continue;
        }
        a.swap(p, r);
        let inv = a[r][c].recip().ok()?;
        for j in 0..cols {
            a[r][j] = a[r][j].mul(&inv);
        }
        for i in 0..a.len() {
            if i == r {
                continue;
            }
            let f = a[i][c].clone();
            if f.abs() <= Float::new(prec_bits) {
                continue;
            }
            for j in 0..cols {
                let t = f.mul(&a[r][j]);
                a[i][j] = a[i][j].sub(&t);
            }
        }
        pivots.push(c);
        r += 1;
    }
    let max_den = Integer::from(1_000_000);
    let tol = Float::with_val(prec_bits, Float::i_exp(1, -(prec_bits as i32) / 3));
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Scalar::zero(); cols];
            v[f] = Scalar::one();
            for (k, &pc) in pivots.iter().enumerate() {
                v[pc] = reconstruct_scalar(&a[k][f].neg(), &max_den, &tol)?;
            }
            Some(v)
        })
        .collect()
}

/// Least-norm-free solve of an overdetermined but consistent numeric system
/// `a x = b`, with rational reconstruction of the solution.
pub fn numeric_solve(a: &[Vec<CFloat>], b: &[CFloat], cols: usize, prec_bits: u32) -> Option<Vec<Scalar>> {
    let rows: Vec<Vec<CFloat>> = a
        .iter()
        .zip(b)
        .map(|(r, bi)| {
            let mut row = r.clone();
            row.push(bi.neg());
            row
        })
        .collect();
    let ns = numeric_nullspace(&rows, cols + 1, prec_bits)?;
    // need a null vector with a nonzero last entry; in reduced form that is
    // the one whose free column is the last
    let v = ns.into_iter().find(|v| v[cols].is_one())?;
    Some(v[..cols].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(n: i64) -> Scalar {
        Scalar::from(n)
    }

    #[test]
    fn nullspace_of_rank_one() {
        let m = Matrix::from_rows(vec![vec![s(1), s(2), s(3)], vec![s(2), s(4), s(6)]]);
        assert_eq!(rank(&m), 1);
        let ns = nullspace(&m);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            assert!(m.mul_vec(v).iter().all(Scalar::is_zero));
        }
    }

    #[test]
    fn complex_entries() {
        let i = Scalar::i();
        let m = Matrix::from_rows(vec![vec![i.clone(), s(1)], vec![s(1), -i.clone()]]);
        // second row is -i times the first
        assert_eq!(rank(&m), 1);
        assert_eq!(det(&m), Scalar::zero());
        let m2 = Matrix::from_rows(vec![vec![Scalar::ratio(1, 2), s(1)], vec![s(3), s(4)]]);
        assert_eq!(det(&m2), s(-1));
    }

    #[test]
    fn solve_consistent_and_not() {
        let m = Matrix::from_rows(vec![vec![s(1), s(1)], vec![s(1), s(-1)], vec![s(2), s(0)]]);
        let x = solve(&m, &[s(3), s(1), s(4)]).unwrap();
        assert_eq!(x, vec![s(2), s(1)]);
        assert!(solve(&m, &[s(3), s(1), s(5)]).is_none());
    }

    #[test]
    fn continued_fraction_reconstruction() {
        let prec = 300;
        let x = Float::with_val(prec, Rational::from((-355, 113)));
        let tol = Float::with_val(prec, Float::i_exp(1, -100));
        let q = reconstruct_rational(&x, &Integer::from(1_000_000), &tol).unwrap();
        assert_eq!(q, Rational::from((-355, 113)));
        let pi = Float::with_val(prec, rug::float::Constant::Pi);
        assert!(reconstruct_rational(&pi, &Integer::from(1_000_000), &tol).is_none());
    }

    #[test]
    fn numeric_nullspace_matches_exact() {
        let prec = 400;
        let rows: Vec<Vec<CFloat>> = [[1i64, 2, 3], [2, 4, 6], [1, 0, -1]]
            .iter()
            .map(|r| r.iter().map(|&v| CFloat::real(Float::with_val(prec, v))).collect())
            .collect();
        let ns = numeric_nullspace(&rows, 3, prec).unwrap();
        let exact = nullspace(&Matrix::from_rows(vec![
            vec![s(1), s(2), s(3)],
            vec![s(2), s(4), s(6)],
            vec![s(1), s(0), s(-1)],
        ]));
        assert_eq!(ns, exact);
    }
}
