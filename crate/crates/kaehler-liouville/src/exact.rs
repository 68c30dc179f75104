//! Exact arithmetic helpers: rationals, parsing, and small integer matrices.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Parses `"p/q"`, an integer, or a finite decimal such as `"-0.25"`.
pub fn parse_q(s: &str) -> Option<Q> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Q::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let neg = int.starts_with('-');
        let int_part: BigInt = if int.is_empty() || int == "-" || int == "+" {
            BigInt::zero()
        } else {
            int.parse().ok()?
        };
        let scale = BigInt::from(10).pow(frac.len() as u32);
        let f: BigInt = frac.parse().ok()?;
        let mag = int_part.abs() * &scale + f;
        let n = if neg { -mag } else { mag };
        return Some(Q::new(n, scale));
    }
    s.parse::<BigInt>().ok().map(Q::from_integer)
}

/// Exact conversion of a finite double.
pub fn q_from_f64(x: f64) -> Option<Q> {
    Q::from_float(x)
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // Fall back to a ratio of big values scaled down.
        let n = x.numer().to_f64().unwrap_or(f64::NAN);
        let d = x.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Canonical `"p/q"` or `"p"` form.
pub fn fmt_q(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn is_int(x: &Q) -> bool {
    x.is_integer()
}

/// Determinant of a square integer matrix (fraction-free elimination).
pub fn det(m: &[Vec<BigInt>]) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut a: Vec<Vec<BigInt>> = m.to_vec();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                a[i][j] = v / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    sign * a[n - 1][n - 1].clone()
}

/// Solves `m x = b` over the rationals; `None` if singular.
pub fn solve(m: &[Vec<Q>], b: &[Q]) -> Option<Vec<Q>> {
    let n = m.len();
    let mut a: Vec<Vec<Q>> = m
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    for k in 0..n {
        let p = (k..n).find(|&r| !a[r][k].is_zero())?;
        a.swap(k, p);
        let piv = a[k][k].clone();
        for v in a[k].iter_mut() {
            *v = &*v / &piv;
        }
        for i in 0..n {
            if i != k && !a[i][k].is_zero() {
                let f = a[i][k].clone();
                for j in k..=n {
                    let t = &a[k][j] * &f;
                    a[i][j] -= t;
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n].clone()).collect())
}

/// Inverse of an integer matrix over the rationals.
pub fn inverse(m: &[Vec<BigInt>]) -> Option<Vec<Vec<Q>>> {
    let n = m.len();
    let mq: Vec<Vec<Q>> = m
        .iter()
        .map(|r| r.iter().map(|x| Q::from_integer(x.clone())).collect())
        .collect();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let e: Vec<Q> = (0..n).map(|i| if i == j { Q::one() } else { Q::zero() }).collect();
        cols.push(solve(&mq, &e)?);
    }
    Some((0..n).map(|i| (0..n).map(|j| cols[j][i].clone()).collect()).collect())
}

/// gcd of all entries (zero for the zero vector).
pub fn content(v: &[BigInt]) -> BigInt {
    v.iter().fold(BigInt::zero(), |g, x| g.gcd(x))
}

/// Columns given as vectors, assembled into a row-major square matrix.
pub fn from_columns(cols: &[&Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let n = cols.len();
    (0..n).map(|i| cols.iter().map(|c| c[i].clone()).collect()).collect()
}

pub fn to_bigint_vec(v: &[i64]) -> Vec<BigInt> {
    v.iter().map(|&x| BigInt::from(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parsing() {
        assert_eq!(parse_q("3/6"), Some(q(1, 2)));
        assert_eq!(parse_q("-0.25"), Some(q(-1, 4)));
        assert_eq!(parse_q("-1.5"), Some(q(-3, 2)));
        assert_eq!(parse_q("7"), Some(qi(7)));
        assert_eq!(parse_q("1/0"), None);
        assert_eq!(parse_q("x"), None);
        assert_eq!(fmt_q(&q(4, 6)), "2/3");
    }

    #[test]
    fn determinants() {
        let m = vec![to_bigint_vec(&[2, 1]), to_bigint_vec(&[1, 1])];
        assert_eq!(det(&m), BigInt::one());
        let m = vec![
            to_bigint_vec(&[0, 1, 0]),
            to_bigint_vec(&[1, 0, 0]),
            to_bigint_vec(&[0, 0, 3]),
        ];
        assert_eq!(det(&m), BigInt::from(-3));
        let inv = inverse(&m).unwrap();
        assert_eq!(inv[2][2], q(1, 3));
    }
}
