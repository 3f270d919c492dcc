//! Double Butcher tableaus for IMEX Runge-Kutta schemes.
//!
//! An [`ImexTableau`] pairs an explicit tableau (Ã, b̃, c̃) with a diagonally
//! implicit one (A, b, c). Rational schemes carry an exact copy of every
//! entry next to the double-precision values so that structural checks and
//! golden comparisons can be done without rounding.

use std::fmt::{self, Write as _};

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::exact::{self, q, qi, Rational};

/// Tolerance for comparisons between irrational entries.
pub const FLOAT_TOL: f64 = 1e-13;

/// Threshold on the row-scaled determinant below which a matrix is singular.
pub const INVERTIBLE_TOL: f64 = 1e-12;

/// Which half of a double tableau an error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Explicit,
    Implicit,
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Part::Explicit => "explicit",
            Part::Implicit => "implicit",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableauError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("{part} abscissa {row} is {found}, row sum is {expected}")]
    AbscissaInconsistent {
        part: Part,
        row: usize,
        expected: f64,
        found: f64,
    },
    #[error("{part} abscissa {row} = {value} lies outside [0, 1]")]
    AbscissaOutOfRange { part: Part, row: usize, value: f64 },
    #[error("{part} matrix has a nonzero entry at ({row}, {col}) above the allowed triangle")]
    NotTriangular { part: Part, row: usize, col: usize },
    #[error("declared GSA flag {declared} disagrees with the tableau")]
    GsaFlagMismatch { declared: bool },
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Exact rational copy of a tableau.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPart {
    pub a: Vec<Vec<Rational>>,
    pub b: Vec<Rational>,
    pub c: Vec<Rational>,
}

/// One Butcher tableau (A, b, c).
#[derive(Debug, Clone, PartialEq)]
pub struct RkTableau {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub exact: Option<ExactPart>,
}

impl RkTableau {
    pub fn from_f64(a: Vec<Vec<f64>>, b: Vec<f64>, c: Vec<f64>) -> Self {
        RkTableau {
            a,
            b,
            c,
            exact: None,
        }
    }

    pub fn from_exact(a: Vec<Vec<Rational>>, b: Vec<Rational>, c: Vec<Rational>) -> Self {
        let conv = |v: &[Rational]| v.iter().map(exact::to_f64).collect::<Vec<_>>();
        RkTableau {
            a: a.iter().map(|r| conv(r)).collect(),
            b: conv(&b),
            c: conv(&c),
            exact: Some(ExactPart { a, b, c }),
        }
    }

    /// Exact tableau whose abscissae are the row sums of `a`.
    pub fn from_exact_rows(a: Vec<Vec<Rational>>, b: Vec<Rational>) -> Self {
        let c = a.iter().map(|r| r.iter().sum()).collect();
        Self::from_exact(a, b, c)
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// Determinant after scaling each row to unit max magnitude, for a lower
    /// triangular matrix restricted to rows/columns `from..`.
    pub(crate) fn scaled_det_lower(&self, from: usize) -> f64 {
        let s = self.stages();
        if let Some(ex) = &self.exact {
            let mut det = Rational::one();
            for i in from..s {
                let m = exact::row_max_abs(&ex.a[i][from..]);
                if m.is_zero() {
                    return 0.0;
                }
                det *= &ex.a[i][i] / m;
            }
            return exact::to_f64(&det);
        }
        let mut det = 1.0;
        for i in from..s {
            let m = self.a[i][from..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if m == 0.0 {
                return 0.0;
            }
            det *= self.a[i][i] / m;
        }
        det
    }

    /// Whether the (lower-triangular) matrix is invertible.
    pub fn is_invertible(&self) -> bool {
        self.scaled_det_lower(0).abs() > INVERTIBLE_TOL
    }

    fn first_row_zero(&self) -> bool {
        match &self.exact {
            Some(ex) => ex.a[0].iter().all(Zero::is_zero),
            None => self.a[0].iter().all(|v| *v == 0.0),
        }
    }

    fn first_col_zero(&self) -> bool {
        match &self.exact {
            Some(ex) => ex.a.iter().all(|r| r[0].is_zero()),
            None => self.a.iter().all(|r| r[0] == 0.0),
        }
    }

    /// Whether `b` equals the last row of `A`.
    pub fn is_stiffly_accurate(&self) -> bool {
        let s = self.stages();
        match &self.exact {
            Some(ex) => ex.b == ex.a[s - 1],
            None => self.b.iter().zip(&self.a[s - 1]).all(|(x, y)| (x - y).abs() <= FLOAT_TOL),
        }
    }

    fn last_abscissa_is_one(&self) -> bool {
        let s = self.stages();
        match &self.exact {
            Some(ex) => ex.c[s - 1].is_one(),
            None => (self.c[s - 1] - 1.0).abs() <= FLOAT_TOL,
        }
    }
}

/// Classification of an IMEX pair by its implicit matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ImexType {
    TypeA,
    TypeCK,
    TypeARS,
    Other,
}

impl fmt::Display for ImexType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ImexType::TypeA => "A",
            ImexType::TypeCK => "CK",
            ImexType::TypeARS => "ARS",
            ImexType::Other => "other",
        })
    }
}

/// Explicit/implicit tableau pair with a name and classical order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImexTableau {
    pub name: String,
    pub order: u32,
    pub explicit: RkTableau,
    pub implicit: RkTableau,
    /// GSA flag stated by the author of the scheme, if any.
    pub declared_gsa: Option<bool>,
}

impl ImexTableau {
    pub fn new(name: impl Into<String>, order: u32, explicit: RkTableau, implicit: RkTableau) -> Self {
        ImexTableau {
            name: name.into(),
            order,
            explicit,
            implicit,
            declared_gsa: None,
        }
    }

    pub fn stages(&self) -> usize {
        self.implicit.stages()
    }

    pub fn is_exact(&self) -> bool {
        self.explicit.is_exact() && self.implicit.is_exact()
    }

    pub fn is_gsa(&self) -> bool {
        is_gsa(self)
    }
}

fn check_part(t: &RkTableau, part: Part, s: usize) -> Result<(), TableauError> {
    let dim = |what: &str, found: usize| {
        if found != s {
            Err(TableauError::DimensionMismatch {
                what: format!("{part} {what}"),
                expected: s,
                found,
            })
        } else {
            Ok(())
        }
    };
    dim("A rows", t.a.len())?;
    for row in &t.a {
        dim("A columns", row.len())?;
    }
    dim("b", t.b.len())?;
    dim("c", t.c.len())?;
    if let Some(ex) = &t.exact {
        dim("exact A rows", ex.a.len())?;
        for row in &ex.a {
            dim("exact A columns", row.len())?;
        }
        dim("exact b", ex.b.len())?;
        dim("exact c", ex.c.len())?;
    }

    let strict = part == Part::Explicit;
    for i in 0..s {
        let first_bad = if strict { i } else { i + 1 };
        for j in first_bad..s {
            let nonzero = match &t.exact {
                Some(ex) => !ex.a[i][j].is_zero(),
                None => t.a[i][j] != 0.0,
            };
            if nonzero {
                return Err(TableauError::NotTriangular { part, row: i, col: j });
            }
        }
    }

    for i in 0..s {
        let (consistent, sum) = match &t.exact {
            Some(ex) => {
                let sum: Rational = ex.a[i].iter().sum();
                (sum == ex.c[i], exact::to_f64(&sum))
            }
            None => {
                let sum: f64 = t.a[i].iter().sum();
                let scale: f64 = 1.0 + t.a[i].iter().map(|v| v.abs()).sum::<f64>();
                ((sum - t.c[i]).abs() <= FLOAT_TOL * scale, sum)
            }
        };
        if !consistent {
            return Err(TableauError::AbscissaInconsistent {
                part,
                row: i,
                expected: sum,
                found: t.c[i],
            });
        }
        if t.c[i] < -FLOAT_TOL || t.c[i] > 1.0 + FLOAT_TOL {
            return Err(TableauError::AbscissaOutOfRange {
                part,
                row: i,
                value: t.c[i],
            });
        }
    }
    Ok(())
}

/// Checks dimensions, triangularity and abscissa consistency.
pub fn validate(t: ImexTableau) -> Result<ImexTableau, TableauError> {
    let s = t.explicit.stages();
    if s == 0 {
        return Err(TableauError::DimensionMismatch {
            what: "stage count".into(),
            expected: 1,
            found: 0,
        });
    }
    check_part(&t.explicit, Part::Explicit, s)?;
    check_part(&t.implicit, Part::Implicit, s)?;
    if let Some(declared) = t.declared_gsa {
        if declared != is_gsa(&t) {
            return Err(TableauError::GsaFlagMismatch { declared });
        }
    }
    Ok(t)
}

fn abscissae_equal(t: &ImexTableau) -> bool {
    match (&t.explicit.exact, &t.implicit.exact) {
        (Some(e), Some(i)) => e.c == i.c,
        _ => t
            .explicit
            .c
            .iter()
            .zip(&t.implicit.c)
            .all(|(x, y)| (x - y).abs() <= FLOAT_TOL),
    }
}

/// Type A, CK, ARS or other, judged on the implicit matrix.
pub fn classify(t: &ImexTableau) -> ImexType {
    let imp = &t.implicit;
    let same_c = abscissae_equal(t);
    if imp.is_invertible() && !same_c {
        return ImexType::TypeA;
    }
    if imp.stages() > 1
        && imp.first_row_zero()
        && imp.scaled_det_lower(1).abs() > INVERTIBLE_TOL
        && same_c
    {
        if imp.first_col_zero() {
            return ImexType::TypeARS;
        }
        return ImexType::TypeCK;
    }
    ImexType::Other
}

/// Globally stiffly accurate: both weight vectors equal the last matrix rows
/// and both last abscissae equal one.
pub fn is_gsa(t: &ImexTableau) -> bool {
    t.implicit.is_stiffly_accurate()
        && t.explicit.is_stiffly_accurate()
        && t.implicit.last_abscissa_is_one()
        && t.explicit.last_abscissa_is_one()
}

/// Advisory check: GSA schemes usually have b̃ ≠ b. Returns the indices
/// where the two weight vectors coincide.
pub fn weight_coincidences(t: &ImexTableau) -> Vec<usize> {
    (0..t.stages())
        .filter(|&i| match (&t.explicit.exact, &t.implicit.exact) {
            (Some(e), Some(m)) => e.b[i] == m.b[i],
            _ => (t.explicit.b[i] - t.implicit.b[i]).abs() <= FLOAT_TOL,
        })
        .collect()
}

fn solve_lower_f64(a: &[Vec<f64>], rhs: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = Vec::with_capacity(rhs.len());
    for i in 0..rhs.len() {
        let mut acc = rhs[i];
        for (j, xj) in x.iter().enumerate() {
            acc -= a[i][j] * xj;
        }
        x.push(acc / a[i][i]);
    }
    x
}

/// Limit of the stability function R(z) as z → −∞.
///
/// Uses 1 − bᵀA⁻¹1 when A is invertible; for a zero first row the explicit
/// first stage is eliminated and the formula is applied to the remaining
/// invertible block. Returns ±∞ when the limit is unbounded.
pub fn r_infinity(t: &RkTableau) -> Result<f64, TableauError> {
    let s = t.stages();
    if t.is_invertible() {
        if let Some(ex) = &t.exact {
            let ones = vec![qi(1); s];
            let w = exact::solve_lower(&ex.a, &ones).ok_or(TableauError::SingularMatrix)?;
            let bw: Rational = ex.b.iter().zip(&w).map(|(b, w)| b * w).sum();
            return Ok(exact::to_f64(&(qi(1) - bw)));
        }
        let w = solve_lower_f64(&t.a, &vec![1.0; s]);
        let bw: f64 = t.b.iter().zip(&w).map(|(b, w)| b * w).sum();
        return Ok(1.0 - bw);
    }
    if s < 2 || !t.first_row_zero() || t.scaled_det_lower(1).abs() <= INVERTIBLE_TOL {
        return Err(TableauError::SingularMatrix);
    }
    // R(z) = 1 + z (b1 − b̂ᵀÂ⁻¹a) − b̂ᵀÂ⁻¹(1 + Â⁻¹a) + O(1/z)
    if let Some(ex) = &t.exact {
        let ah: Vec<Vec<Rational>> = ex.a[1..].iter().map(|r| r[1..].to_vec()).collect();
        let col: Vec<Rational> = ex.a[1..].iter().map(|r| r[0].clone()).collect();
        let bh = &ex.b[1..];
        let u = exact::solve_lower(&ah, &col).ok_or(TableauError::SingularMatrix)?;
        let lin = &ex.b[0] - bh.iter().zip(&u).map(|(b, u)| b * u).sum::<Rational>();
        if !lin.is_zero() {
            return Ok(if lin.is_positive() { f64::NEG_INFINITY } else { f64::INFINITY });
        }
        let rhs: Vec<Rational> = u.iter().map(|v| qi(1) + v).collect();
        let w = exact::solve_lower(&ah, &rhs).ok_or(TableauError::SingularMatrix)?;
        let bw: Rational = bh.iter().zip(&w).map(|(b, w)| b * w).sum();
        return Ok(exact::to_f64(&(qi(1) - bw)));
    }
    let ah: Vec<Vec<f64>> = t.a[1..].iter().map(|r| r[1..].to_vec()).collect();
    let col: Vec<f64> = t.a[1..].iter().map(|r| r[0]).collect();
    let bh = &t.b[1..];
    let u = solve_lower_f64(&ah, &col);
    let lin = t.b[0] - bh.iter().zip(&u).map(|(b, u)| b * u).sum::<f64>();
    let scale = 1.0 + t.b.iter().map(|v| v.abs()).sum::<f64>();
    if lin.abs() > FLOAT_TOL * scale {
        return Ok(if lin > 0.0 { f64::NEG_INFINITY } else { f64::INFINITY });
    }
    let rhs: Vec<f64> = u.iter().map(|v| 1.0 + v).collect();
    let w = solve_lower_f64(&ah, &rhs);
    Ok(1.0 - bh.iter().zip(&w).map(|(b, w)| b * w).sum::<f64>())
}

/// Stability function R(z) = 1 + z bᵀ(I − zA)⁻¹1 of a lower-triangular tableau.
pub fn stability_function(t: &RkTableau, z: f64) -> f64 {
    let s = t.stages();
    let m: Vec<Vec<f64>> = (0..s)
        .map(|i| {
            (0..s)
                .map(|j| if i == j { 1.0 } else { 0.0 } - z * t.a[i][j])
                .collect()
        })
        .collect();
    let w = solve_lower_f64(&m, &vec![1.0; s]);
    1.0 + z * t.b.iter().zip(&w).map(|(b, w)| b * w).sum::<f64>()
}

fn exact_rows(rows: &[&[(i64, i64)]]) -> Vec<Vec<Rational>> {
    rows.iter().map(|r| r.iter().map(|&(n, d)| q(n, d)).collect()).collect()
}

fn last_row(a: &[Vec<Rational>]) -> Vec<Rational> {
    a.last().cloned().unwrap_or_default()
}

fn catalog_entry(name: &str, order: u32, gsa: bool, ex: RkTableau, im: RkTableau) -> ImexTableau {
    let mut t = ImexTableau::new(name, order, ex, im);
    t.declared_gsa = Some(gsa);
    t
}

/// γ = 1 − √2/2 shared by the second-order schemes.
pub fn gamma2() -> f64 {
    1.0 - std::f64::consts::SQRT_2 / 2.0
}

/// The six built-in schemes, in a fixed order.
pub fn builtin_catalog() -> Vec<ImexTableau> {
    let mut out = Vec::new();

    let ex1 = exact_rows(&[&[(0, 1), (0, 1)], &[(1, 1), (0, 1)]]);
    let ex1_t = RkTableau::from_exact_rows(ex1.clone(), last_row(&ex1));
    let ars = exact_rows(&[&[(0, 1), (0, 1)], &[(0, 1), (1, 1)]]);
    out.push(catalog_entry(
        "IMEX1-GSA-ARS",
        1,
        true,
        ex1_t.clone(),
        RkTableau::from_exact_rows(ars.clone(), last_row(&ars)),
    ));

    let a_gsa = exact_rows(&[&[(1, 1), (0, 1)], &[(0, 1), (1, 1)]]);
    out.push(catalog_entry(
        "IMEX1-GSA-A",
        1,
        true,
        ex1_t,
        RkTableau::from_exact_rows(a_gsa.clone(), last_row(&a_gsa)),
    ));

    out.push(catalog_entry(
        "IMEX1-NGSA-A",
        1,
        false,
        RkTableau::from_exact_rows(vec![vec![qi(0)]], vec![qi(1)]),
        RkTableau::from_exact_rows(vec![vec![qi(1)]], vec![qi(1)]),
    ));

    let g = gamma2();
    let d = 1.0 - 1.0 / (2.0 * g);
    out.push(catalog_entry(
        "IMEX2-ARS",
        2,
        true,
        RkTableau::from_f64(
            vec![vec![0.0, 0.0, 0.0], vec![g, 0.0, 0.0], vec![d, 1.0 - d, 0.0]],
            vec![d, 1.0 - d, 0.0],
            vec![0.0, g, 1.0],
        ),
        RkTableau::from_f64(
            vec![vec![0.0, 0.0, 0.0], vec![0.0, g, 0.0], vec![0.0, 1.0 - g, g]],
            vec![0.0, 1.0 - g, g],
            vec![0.0, g, 1.0],
        ),
    ));

    let ck_ex = exact_rows(&[
        &[(0, 1), (0, 1), (0, 1)],
        &[(2, 3), (0, 1), (0, 1)],
        &[(1, 4), (3, 4), (0, 1)],
    ]);
    let ck_last = vec![0.25 + g / 2.0, 0.75 - 1.5 * g, g];
    out.push(catalog_entry(
        "IMEX2-CK",
        2,
        true,
        RkTableau::from_exact_rows(ck_ex.clone(), last_row(&ck_ex)),
        RkTableau::from_f64(
            vec![vec![0.0, 0.0, 0.0], vec![2.0 / 3.0 - g, g, 0.0], ck_last.clone()],
            ck_last,
            vec![0.0, 2.0 / 3.0, 1.0],
        ),
    ));

    let ars3_ex = exact_rows(&[
        &[(0, 1), (0, 1), (0, 1), (0, 1), (0, 1)],
        &[(1, 2), (0, 1), (0, 1), (0, 1), (0, 1)],
        &[(11, 18), (1, 18), (0, 1), (0, 1), (0, 1)],
        &[(5, 6), (-5, 6), (1, 2), (0, 1), (0, 1)],
        &[(1, 4), (7, 4), (3, 4), (-7, 4), (0, 1)],
    ]);
    let ars3_im = exact_rows(&[
        &[(0, 1), (0, 1), (0, 1), (0, 1), (0, 1)],
        &[(0, 1), (1, 2), (0, 1), (0, 1), (0, 1)],
        &[(0, 1), (1, 6), (1, 2), (0, 1), (0, 1)],
        &[(0, 1), (-1, 2), (1, 2), (1, 2), (0, 1)],
        &[(0, 1), (3, 2), (-3, 2), (1, 2), (1, 2)],
    ]);
    out.push(catalog_entry(
        "IMEX3-ARS",
        3,
        true,
        RkTableau::from_exact_rows(ars3_ex.clone(), last_row(&ars3_ex)),
        RkTableau::from_exact_rows(ars3_im.clone(), last_row(&ars3_im)),
    ));
    out
}

/// Finds a catalog scheme by name, case-insensitively. Short aliases such as
/// `imex1-ars` and `imex1-ngsa` are accepted.
pub fn lookup(name: &str) -> Option<ImexTableau> {
    let key = name.trim().to_ascii_uppercase();
    let canonical = match key.as_str() {
        "IMEX1-ARS" | "IMEX1" | "IMEX1-GSA-ARS" => "IMEX1-GSA-ARS",
        "IMEX1-A" | "IMEX1-GSA-A" => "IMEX1-GSA-A",
        "IMEX1-NGSA" | "IMEX1-NGSA-A" => "IMEX1-NGSA-A",
        "IMEX2-ARS" | "IMEX2-ARS-GSA" => "IMEX2-ARS",
        "IMEX2-CK" => "IMEX2-CK",
        "IMEX3-ARS" | "IMEX3" => "IMEX3-ARS",
        other => other,
    };
    builtin_catalog().into_iter().find(|t| t.name == canonical)
}

/// Number format used by [`format_tableau`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextFormat {
    /// Exact `p/q` literals where available, decimals otherwise.
    Rational,
    /// 17 significant digits for every entry.
    Decimal,
}

fn fmt_part(out: &mut String, label: &str, t: &RkTableau, fmt: TextFormat) {
    let lit = |x: f64, e: Option<&Rational>| match (fmt, e) {
        (TextFormat::Rational, Some(r)) => exact::format(r),
        _ => format!("{x:.16e}"),
    };
    let ex = t.exact.as_ref();
    let _ = writeln!(out, "{label} A");
    for (i, row) in t.a.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(j, &x)| lit(x, ex.map(|e| &e.a[i][j])))
            .collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    let vec_line = |v: &[f64], e: Option<&Vec<Rational>>| {
        v.iter()
            .enumerate()
            .map(|(i, &x)| lit(x, e.map(|e| &e[i])))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(out, "{label} b");
    let _ = writeln!(out, "{}", vec_line(&t.b, ex.map(|e| &e.b)));
    let _ = writeln!(out, "{label} c");
    let _ = writeln!(out, "{}", vec_line(&t.c, ex.map(|e| &e.c)));
}

/// Renders a tableau in the block text format read by [`parse_tableau`].
pub fn format_tableau(t: &ImexTableau, fmt: TextFormat) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "name {}", t.name);
    let _ = writeln!(out, "order {}", t.order);
    if let Some(g) = t.declared_gsa {
        let _ = writeln!(out, "gsa {g}");
    }
    let _ = writeln!(out, "stages {}", t.stages());
    fmt_part(&mut out, "explicit", &t.explicit, fmt);
    fmt_part(&mut out, "implicit", &t.implicit, fmt);
    out
}

enum Lit {
    Exact(Rational),
    Float(f64),
}

fn parse_lit(tok: &str, line: usize) -> Result<Lit, TableauError> {
    if let Some(r) = exact::parse(tok) {
        return Ok(Lit::Exact(r));
    }
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Lit::Float(v)),
        _ => Err(TableauError::Parse {
            line,
            msg: format!("bad number `{tok}`"),
        }),
    }
}

fn lit_f64(l: &Lit) -> f64 {
    match l {
        Lit::Exact(r) => exact::to_f64(r),
        Lit::Float(v) => *v,
    }
}

struct RawPart {
    a: Vec<Vec<Lit>>,
    b: Vec<Lit>,
    c: Vec<Lit>,
}

fn build_part(p: RawPart) -> RkTableau {
    let all_exact = p
        .a
        .iter()
        .flatten()
        .chain(&p.b)
        .chain(&p.c)
        .all(|l| matches!(l, Lit::Exact(_)));
    if all_exact {
        let ex = |l: &Lit| match l {
            Lit::Exact(r) => r.clone(),
            Lit::Float(_) => unreachable!(),
        };
        return RkTableau::from_exact(
            p.a.iter().map(|r| r.iter().map(ex).collect()).collect(),
            p.b.iter().map(ex).collect(),
            p.c.iter().map(ex).collect(),
        );
    }
    RkTableau::from_f64(
        p.a.iter().map(|r| r.iter().map(lit_f64).collect()).collect(),
        p.b.iter().map(lit_f64).collect(),
        p.c.iter().map(lit_f64).collect(),
    )
}

/// Parses the block text format and validates the result.
///
/// ```text
/// name my-scheme
/// order 1
/// stages 2
/// explicit A
/// 0 0
/// 1 0
/// explicit b
/// 1 0
/// explicit c
/// 0 1
/// implicit A
/// ...
/// ```
/// A part is kept exact when all of its literals are integers or `p/q`.
pub fn parse_tableau(text: &str) -> Result<ImexTableau, TableauError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .peekable();
    let mut name = String::from("user");
    let mut order = 1u32;
    let mut gsa = None;
    let mut stages: Option<usize> = None;
    let mut parts: [Option<RawPart>; 2] = [None, None];

    let perr = |line: usize, msg: &str| TableauError::Parse {
        line,
        msg: msg.to_string(),
    };

    while let Some((ln, line)) = lines.next() {
        let mut toks = line.split_whitespace();
        let head = toks.next().unwrap_or("");
        match head {
            "name" => name = toks.collect::<Vec<_>>().join(" "),
            "order" => {
                order = toks
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| perr(ln, "bad order"))?
            }
            "gsa" => {
                gsa = Some(
                    toks.next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| perr(ln, "bad gsa flag"))?,
                )
            }
            "stages" => {
                stages = Some(
                    toks.next()
                        .and_then(|t| t.parse().ok())
                        .filter(|&s: &usize| s > 0)
                        .ok_or_else(|| perr(ln, "bad stage count"))?,
                )
            }
            "explicit" | "implicit" => {
                let s = stages.ok_or_else(|| perr(ln, "`stages` must come first"))?;
                let idx = usize::from(head == "implicit");
                if toks.next() != Some("A") {
                    return Err(perr(ln, "expected `A` section"));
                }
                let mut read_row = |expect: &str| -> Result<Vec<Lit>, TableauError> {
                    if !expect.is_empty() {
                        let (l, hdr) = lines.next().ok_or_else(|| perr(ln, "unexpected end"))?;
                        if hdr != format!("{head} {expect}") {
                            return Err(perr(l, &format!("expected `{head} {expect}`")));
                        }
                    }
                    let (l, row) = lines.next().ok_or_else(|| perr(ln, "unexpected end"))?;
                    let vals = row
                        .split_whitespace()
                        .map(|t| parse_lit(t, l))
                        .collect::<Result<Vec<_>, _>>()?;
                    if vals.len() != s {
                        return Err(TableauError::DimensionMismatch {
                            what: format!("{head} row at line {l}"),
                            expected: s,
                            found: vals.len(),
                        });
                    }
                    Ok(vals)
                };
                let mut a = Vec::with_capacity(s);
                for _ in 0..s {
                    a.push(read_row("")?);
                }
                let b = read_row("b")?;
                let c = read_row("c")?;
                parts[idx] = Some(RawPart { a, b, c });
            }
            other => return Err(perr(ln, &format!("unknown keyword `{other}`"))),
        }
    }
    let [ex, im] = parts;
    let ex = ex.ok_or_else(|| perr(0, "missing explicit part"))?;
    let im = im.ok_or_else(|| perr(0, "missing implicit part"))?;
    let mut t = ImexTableau::new(name, order, build_part(ex), build_part(im));
    t.declared_gsa = gsa;
    validate(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat(name: &str) -> ImexTableau {
        lookup(name).unwrap()
    }

    #[test]
    fn catalog_is_valid() {
        for t in builtin_catalog() {
            let name = t.name.clone();
            assert!(validate(t).is_ok(), "{name}");
        }
    }

    #[test]
    fn first_order_ars_abscissae() {
        let t = validate(cat("imex1-ars")).unwrap();
        assert_eq!(t.explicit.c, vec![0.0, 1.0]);
        assert_eq!(t.implicit.c, vec![0.0, 1.0]);
    }

    #[test]
    fn inconsistent_abscissa_is_reported() {
        let part = RkTableau::from_exact(vec![vec![qi(1)]], vec![qi(1)], vec![qi(0)]);
        let ex = RkTableau::from_exact(vec![vec![qi(0)]], vec![qi(1)], vec![qi(0)]);
        let err = validate(ImexTableau::new("bad", 1, ex, part)).unwrap_err();
        assert!(matches!(
            err,
            TableauError::AbscissaInconsistent { part: Part::Implicit, row: 0, .. }
        ));
    }

    #[test]
    fn explicit_diagonal_is_rejected() {
        let ex = RkTableau::from_exact(vec![vec![qi(1)]], vec![qi(1)], vec![qi(1)]);
        let im = RkTableau::from_exact(vec![vec![qi(1)]], vec![qi(1)], vec![qi(1)]);
        let err = validate(ImexTableau::new("bad", 1, ex, im)).unwrap_err();
        assert!(matches!(err, TableauError::NotTriangular { part: Part::Explicit, .. }));
    }

    #[test]
    fn second_order_ars_abscissae() {
        let t = validate(cat("IMEX2-ARS")).unwrap();
        let g = 1.0 - 2f64.sqrt() / 2.0;
        assert!((t.implicit.c[1] - g).abs() < 1e-15);
        assert_eq!(t.implicit.c[2], 1.0);
    }

    #[test]
    fn classification_matches_catalog() {
        assert_eq!(classify(&cat("IMEX1-GSA-ARS")), ImexType::TypeARS);
        assert_eq!(classify(&cat("IMEX1-GSA-A")), ImexType::TypeA);
        assert_eq!(classify(&cat("IMEX1-NGSA-A")), ImexType::TypeA);
        assert_eq!(classify(&cat("IMEX2-ARS")), ImexType::TypeARS);
        assert_eq!(classify(&cat("IMEX2-CK")), ImexType::TypeCK);
        assert_eq!(classify(&cat("IMEX3-ARS")), ImexType::TypeARS);
    }

    #[test]
    fn gsa_flags() {
        assert!(is_gsa(&cat("IMEX1-GSA-ARS")));
        assert!(!is_gsa(&cat("IMEX1-NGSA-A")));
        assert!(is_gsa(&cat("IMEX3-ARS")));
    }

    #[test]
    fn r_infinity_values() {
        let euler = RkTableau::from_exact(vec![vec![qi(1)]], vec![qi(1)], vec![qi(1)]);
        assert_eq!(r_infinity(&euler).unwrap(), 0.0);
        assert_eq!(r_infinity(&cat("IMEX1-GSA-A").implicit).unwrap(), 0.0);
        let ars2 = cat("IMEX2-ARS").implicit;
        let r = r_infinity(&ars2).unwrap();
        assert!(r.abs() < 1e-12);
        for z in [-1e8, -1e10] {
            assert!((stability_function(&ars2, z) - r).abs() < 1e-6);
        }
        let ck = cat("IMEX2-CK").implicit;
        assert!(r_infinity(&ck).unwrap().abs() < 1e-12);
    }

    #[test]
    fn singular_without_ck_structure() {
        let t = RkTableau::from_exact(
            vec![vec![qi(1), qi(0)], vec![qi(1), qi(0)]],
            vec![qi(1), qi(0)],
            vec![qi(1), qi(1)],
        );
        assert_eq!(r_infinity(&t), Err(TableauError::SingularMatrix));
    }

    #[test]
    fn catalog_entries_from_the_tables() {
        let ck = cat("IMEX2-CK");
        assert!((ck.implicit.a[1][1] - gamma2()).abs() < 1e-16);
        let ars3 = cat("IMEX3-ARS");
        assert_eq!(ars3.explicit.exact.as_ref().unwrap().a[2][1], q(1, 18));
    }

    #[test]
    fn text_round_trip() {
        for t in builtin_catalog() {
            for fmt in [TextFormat::Rational, TextFormat::Decimal] {
                let text = format_tableau(&t, fmt);
                let back = parse_tableau(&text).unwrap();
                assert_eq!(back.explicit.a, t.explicit.a);
                assert_eq!(back.implicit.b, t.implicit.b);
                assert_eq!(back.implicit.c, t.implicit.c);
                if fmt == TextFormat::Rational {
                    assert_eq!(back, t);
                }
            }
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_tableau("stages 1\nexplicit A\nx\n").unwrap_err();
        assert!(matches!(err, TableauError::Parse { line: 3, .. }));
    }
}
