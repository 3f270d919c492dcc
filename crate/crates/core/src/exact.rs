//! Small helpers around arbitrary-precision rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact rational scalar used for tableau entries and quadrature weights.
pub type Rational = BigRational;

/// Builds `n / d`.
pub fn q(n: i64, d: i64) -> Rational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Integer as a rational.
pub fn qi(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

/// Nearest double to an exact rational.
pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Exact rational value of a finite double.
pub fn from_f64(x: f64) -> Option<Rational> {
    BigRational::from_float(x)
}

/// Parses an integer or `p/q` literal. Decimal literals return `None`.
pub fn parse(lit: &str) -> Option<Rational> {
    let lit = lit.trim();
    let (num, den) = match lit.split_once('/') {
        Some((n, d)) => (n, d),
        None => (lit, "1"),
    };
    let is_int = |s: &str| {
        let s = s.strip_prefix(['-', '+']).unwrap_or(s);
        !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
    };
    if !is_int(num) || !is_int(den) {
        return None;
    }
    let n: BigInt = num.trim_start_matches('+').parse().ok()?;
    let d: BigInt = den.trim_start_matches('+').parse().ok()?;
    if d.is_zero() {
        return None;
    }
    Some(BigRational::new(n, d))
}

/// Formats as `p` or `p/q` in lowest terms.
pub fn format(x: &Rational) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Determinant by Gaussian elimination over the rationals.
pub fn det(m: &[Vec<Rational>]) -> Rational {
    let n = m.len();
    let mut a: Vec<Vec<Rational>> = m.to_vec();
    let mut det = Rational::one();
    for col in 0..n {
        let Some(piv) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return Rational::zero();
        };
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        let p = a[col][col].clone();
        det *= &p;
        for r in col + 1..n {
            if a[r][col].is_zero() {
                continue;
            }
            let f = &a[r][col] / &p;
            let (upper, lower) = a.split_at_mut(r);
            for (x, y) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *x -= &f * y;
            }
        }
    }
    det
}

/// Solves a lower-triangular system exactly. Returns `None` on a zero pivot.
pub fn solve_lower(a: &[Vec<Rational>], rhs: &[Rational]) -> Option<Vec<Rational>> {
    let n = rhs.len();
    let mut x: Vec<Rational> = Vec::with_capacity(n);
    for i in 0..n {
        if a[i][i].is_zero() {
            return None;
        }
        let mut acc = rhs[i].clone();
        for (j, xj) in x.iter().enumerate() {
            acc -= &a[i][j] * xj;
        }
        x.push(acc / &a[i][i]);
    }
    Some(x)
}

/// Largest absolute entry of a row, as a rational.
pub fn row_max_abs(row: &[Rational]) -> Rational {
    row.iter().map(|v| v.abs()).fold(Rational::zero(), |m, v| if v > m { v } else { m })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        for lit in ["0", "-3", "1/2", "-7/4", "292/2187"] {
            let v = parse(lit).unwrap();
            assert_eq!(format(&v), lit);
        }
        assert_eq!(parse("2/4").unwrap(), q(1, 2));
        assert!(parse("0.5").is_none());
        assert!(parse("1/0").is_none());
        assert!(parse("1e3").is_none());
    }

    #[test]
    fn determinant_of_small_matrices() {
        let m = vec![vec![q(1, 2), qi(3)], vec![qi(1), qi(4)]];
        assert_eq!(det(&m), qi(-1));
        let singular = vec![vec![qi(1), qi(2)], vec![qi(2), qi(4)]];
        assert!(det(&singular).is_zero());
    }

    #[test]
    fn lower_solve_is_exact() {
        let a = vec![vec![q(1, 3), qi(0)], vec![qi(1), q(1, 2)]];
        let x = solve_lower(&a, &[qi(1), qi(1)]).unwrap();
        assert_eq!(x, vec![qi(3), qi(-4)]);
    }

    #[test]
    fn float_conversion_is_exact_for_dyadics() {
        assert_eq!(from_f64(0.375).unwrap(), q(3, 8));
        assert_eq!(to_f64(&q(1, 3)), 1.0 / 3.0);
    }
}
