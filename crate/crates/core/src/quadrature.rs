//! Uniform InDC quadrature on M nodes τ_m = m/M, m = 1..M (the left
//! endpoint is not a node).
//!
//! Work is done in the variable θ = M·t, so a substep has unit length and the
//! nodes sit at θ = 1..M. All weights are computed with exact rationals and
//! rounded once.

use num_traits::{One, Zero};
use thiserror::Error;

use crate::exact::{self, qi, Rational};

/// Largest supported node count.
pub const MAX_NODES: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("node count must be at least 1")]
    InvalidM,
    #[error("node count {0} exceeds the supported maximum of {MAX_NODES}")]
    TooManyNodes(usize),
    #[error("abscissa {chi} or substep {substep} out of range")]
    OutOfRange { chi: f64, substep: usize },
    #[error("expected {expected} values, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Integration and interpolation weights for a point inside a substep.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRow {
    /// ∫ from τ_m to τ_m + χh of each basis polynomial, divided by h.
    pub integration: Vec<f64>,
    /// Each basis polynomial evaluated at τ_m + χh.
    pub interpolation: Vec<f64>,
}

/// Exact counterpart of [`StageRow`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExactStageRow {
    pub integration: Vec<Rational>,
    pub interpolation: Vec<Rational>,
}

impl ExactStageRow {
    pub fn to_f64(&self) -> StageRow {
        StageRow {
            integration: self.integration.iter().map(exact::to_f64).collect(),
            interpolation: self.interpolation.iter().map(exact::to_f64).collect(),
        }
    }
}

/// Nodes plus the per-substep and cumulative integration matrices.
#[derive(Debug, Clone)]
pub struct QuadratureSet {
    m: usize,
    /// Monomial coefficients (in θ) of the Lagrange basis, one row per node.
    basis: Vec<Vec<Rational>>,
    s_sub_exact: Vec<Vec<Rational>>,
    s_cum_exact: Vec<Vec<Rational>>,
    /// Node positions τ_1..τ_M on the unit interval.
    pub nodes: Vec<f64>,
    /// Row m: ∫_m^{m+1} α_l(θ) dθ, in substep units; rows sum to 1.
    pub s_sub: Vec<Vec<f64>>,
    /// Row i: ∫_0^{i+1} α_l(θ) dθ / M, in units of the full interval.
    pub s_cum: Vec<Vec<f64>>,
}

fn poly_eval(p: &[Rational], x: &Rational) -> Rational {
    p.iter().rev().fold(Rational::zero(), |acc, c| acc * x + c)
}

fn poly_integral(p: &[Rational], a: &Rational, b: &Rational) -> Rational {
    let mut pa = a.clone();
    let mut pb = b.clone();
    let mut acc = Rational::zero();
    for (k, c) in p.iter().enumerate() {
        acc += c * (&pb - &pa) / qi(k as i64 + 1);
        pa *= a;
        pb *= b;
    }
    acc
}

impl QuadratureSet {
    pub fn build(m: usize) -> Result<Self, QuadratureError> {
        if m == 0 {
            return Err(QuadratureError::InvalidM);
        }
        if m > MAX_NODES {
            return Err(QuadratureError::TooManyNodes(m));
        }
        let mut basis = Vec::with_capacity(m);
        for l in 1..=m as i64 {
            let mut p = vec![Rational::one()];
            for j in (1..=m as i64).filter(|&j| j != l) {
                let inv = Rational::one() / qi(l - j);
                let mut next = vec![Rational::zero(); p.len() + 1];
                for (k, c) in p.iter().enumerate() {
                    next[k + 1] += c * &inv;
                    next[k] -= c * qi(j) * &inv;
                }
                p = next;
            }
            basis.push(p);
        }
        let s_sub_exact: Vec<Vec<Rational>> = (0..m as i64)
            .map(|row| {
                basis
                    .iter()
                    .map(|p| poly_integral(p, &qi(row), &qi(row + 1)))
                    .collect()
            })
            .collect();
        let mut s_cum_exact = Vec::with_capacity(m);
        let mut acc = vec![Rational::zero(); m];
        let inv_m = Rational::one() / qi(m as i64);
        for row in &s_sub_exact {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
            s_cum_exact.push(acc.iter().map(|v| v * &inv_m).collect::<Vec<_>>());
        }
        let conv = |rows: &[Vec<Rational>]| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| r.iter().map(exact::to_f64).collect())
                .collect()
        };
        Ok(QuadratureSet {
            m,
            nodes: (1..=m).map(|i| i as f64 / m as f64).collect(),
            s_sub: conv(&s_sub_exact),
            s_cum: conv(&s_cum_exact),
            basis,
            s_sub_exact,
            s_cum_exact,
        })
    }

    /// Number of nodes M.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn s_sub_exact(&self) -> &[Vec<Rational>] {
        &self.s_sub_exact
    }

    pub fn s_cum_exact(&self) -> &[Vec<Rational>] {
        &self.s_cum_exact
    }

    /// Exact rows for the point τ_m + χh of substep `m`.
    pub fn stage_row_exact(&self, chi: &Rational, m: usize) -> Result<ExactStageRow, QuadratureError> {
        if m >= self.m || *chi < Rational::zero() || *chi > Rational::one() {
            return Err(QuadratureError::OutOfRange {
                chi: exact::to_f64(chi),
                substep: m,
            });
        }
        let a = qi(m as i64);
        let b = &a + chi;
        Ok(ExactStageRow {
            integration: self.basis.iter().map(|p| poly_integral(p, &a, &b)).collect(),
            interpolation: self.basis.iter().map(|p| poly_eval(p, &b)).collect(),
        })
    }

    /// Rows for a double-precision abscissa, taken exactly as a dyadic rational.
    pub fn stage_row(&self, chi: f64, m: usize) -> Result<StageRow, QuadratureError> {
        let out_of_range = QuadratureError::OutOfRange { chi, substep: m };
        let q = exact::from_f64(chi).ok_or(out_of_range)?;
        Ok(self.stage_row_exact(&q, m)?.to_f64())
    }

    /// Value at θ ∈ [0, M] of the degree M−1 interpolant through `values`
    /// given at θ = 1..M.
    pub fn interpolate(&self, values: &[f64], theta: f64) -> Result<f64, QuadratureError> {
        if values.len() != self.m {
            return Err(QuadratureError::DimensionMismatch {
                expected: self.m,
                found: values.len(),
            });
        }
        let mut acc = 0.0;
        for (l, v) in values.iter().enumerate() {
            let xl = (l + 1) as f64;
            let mut w = 1.0;
            for j in (1..=self.m).filter(|&j| j != l + 1) {
                let xj = j as f64;
                w *= (theta - xj) / (xl - xj);
            }
            acc += w * v;
        }
        Ok(acc)
    }
}
