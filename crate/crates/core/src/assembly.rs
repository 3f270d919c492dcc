//! The InDC step written as one large IMEX Runge-Kutta tableau.
//!
//! The tableau is obtained by running the correction loop symbolically: every
//! quantity is kept as an affine combination `u_0 + Σ ã_j F_j + Σ a_j G_j` of
//! stage samples, each new stage records the combination that defines it,
//! and the final node value supplies the weights. The construction is exact
//! when the base tableau is rational.

use std::ops::Neg;

use num_traits::Num;
use thiserror::Error;

use crate::exact::{self, Rational};
use crate::quadrature::{QuadratureError, QuadratureSet};
use crate::tableau::{classify, format_tableau, ImexTableau, ImexType, RkTableau, TableauError, TextFormat};

/// Largest accepted value of M·(K+1)·s.
pub const MAX_ASSEMBLED: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("M·(K+1)·s = {size} exceeds the limit of {MAX_ASSEMBLED}")]
    TooLarge { size: usize },
    #[error("unsupported base `{0}`: only globally stiffly accurate bases or single-stage bases can be assembled")]
    UnsupportedStructure(String),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Tableau(#[from] TableauError),
}

trait Scalar: Clone + PartialEq + Num + Neg<Output = Self> {}
impl<T: Clone + PartialEq + Num + Neg<Output = T>> Scalar for T {}

fn at<T: Scalar>(v: &[T], i: usize) -> T {
    v.get(i).cloned().unwrap_or_else(T::zero)
}

fn padded_eq<T: Scalar>(a: &[T], b: &[T]) -> bool {
    (0..a.len().max(b.len())).all(|i| at(a, i) == at(b, i))
}

fn bump<T: Scalar>(v: &mut Vec<T>, j: usize, c: T) {
    if c.is_zero() {
        return;
    }
    if v.len() <= j {
        v.resize(j + 1, T::zero());
    }
    v[j] = v[j].clone() + c;
}

/// `u0·u_0 + Σ ex_j F_j + Σ im_j G_j`.
#[derive(Debug, Clone)]
struct Lin<T> {
    u0: T,
    ex: Vec<T>,
    im: Vec<T>,
}

impl<T: Scalar> Lin<T> {
    fn zero() -> Self {
        Lin {
            u0: T::zero(),
            ex: Vec::new(),
            im: Vec::new(),
        }
    }

    fn state() -> Self {
        Lin {
            u0: T::one(),
            ..Self::zero()
        }
    }

    fn add_scaled(&mut self, c: &T, o: &Lin<T>) {
        if c.is_zero() {
            return;
        }
        self.u0 = self.u0.clone() + c.clone() * o.u0.clone();
        for (j, v) in o.ex.iter().enumerate() {
            bump(&mut self.ex, j, c.clone() * v.clone());
        }
        for (j, v) in o.im.iter().enumerate() {
            bump(&mut self.im, j, c.clone() * v.clone());
        }
    }

    fn same(&self, o: &Lin<T>) -> bool {
        self.u0 == o.u0 && padded_eq(&self.ex, &o.ex) && padded_eq(&self.im, &o.im)
    }
}

/// Growing list of stages: value_j = row_j + diag_j G_j.
struct Builder<T> {
    rows: Vec<Lin<T>>,
    diag: Vec<T>,
    sweep: Vec<Option<usize>>,
    current: Option<usize>,
}

impl<T: Scalar> Builder<T> {
    fn value(&self, j: usize) -> Lin<T> {
        let mut v = self.rows[j].clone();
        bump(&mut v.im, j, self.diag[j].clone());
        v
    }

    fn push(&mut self, row: Lin<T>, diag: T) -> usize {
        self.rows.push(row);
        self.diag.push(diag);
        self.sweep.push(self.current);
        self.rows.len() - 1
    }

    /// Index of a stage with value `state`, created as an explicit stage if needed.
    fn intern(&mut self, state: Lin<T>) -> usize {
        if let Some(j) = (0..self.rows.len()).find(|&j| self.value(j).same(&state)) {
            return j;
        }
        self.push(state, T::zero())
    }

    fn stage(&mut self, known: Lin<T>, gamma: T) -> usize {
        if gamma.is_zero() {
            self.intern(known)
        } else {
            self.push(known, gamma)
        }
    }
}

struct Rows<T> {
    integration: Vec<T>,
    interpolation: Vec<T>,
}

struct Coeffs<T> {
    m: usize,
    k: usize,
    gsa: bool,
    h: T,
    ea: Vec<Vec<T>>,
    eb: Vec<T>,
    ec: Vec<T>,
    ia: Vec<Vec<T>>,
    ib: Vec<T>,
    ic: Vec<T>,
    s_sub: Vec<Vec<T>>,
    /// `[m][i]` rows for the explicit and implicit abscissae.
    rx: Vec<Vec<Rows<T>>>,
    ri: Vec<Vec<Rows<T>>>,
}

/// Interpolant of node samples at a stage abscissa, as F or G columns.
fn node_combo<T: Scalar>(nodes: &[usize], m: usize, rows: &Rows<T>, at_left: bool, implicit: bool) -> Lin<T> {
    let mut v = Vec::new();
    if m == 0 && at_left {
        bump(&mut v, nodes[0], T::one());
    } else {
        for (j, w) in rows.interpolation.iter().enumerate() {
            bump(&mut v, nodes[j + 1], w.clone());
        }
    }
    let mut l = Lin::zero();
    if implicit {
        l.im = v;
    } else {
        l.ex = v;
    }
    l
}

fn f_col<T: Scalar>(j: usize, c: T) -> Lin<T> {
    let mut l = Lin::zero();
    bump(&mut l.ex, j, c);
    l
}

fn g_col<T: Scalar>(j: usize, c: T) -> Lin<T> {
    let mut l = Lin::zero();
    bump(&mut l.im, j, c);
    l
}

struct Unrolled<T> {
    rows: Vec<Lin<T>>,
    diag: Vec<T>,
    sweep: Vec<Option<usize>>,
    output: Lin<T>,
}

/// Mirrors the prediction and correction sweeps of the loop integrator.
#[allow(clippy::needless_range_loop)]
fn unroll<T: Scalar>(c: &Coeffs<T>) -> Unrolled<T> {
    let s = c.ib.len();
    let h = c.h.clone();
    let mut b = Builder {
        rows: Vec::new(),
        diag: Vec::new(),
        sweep: Vec::new(),
        current: None,
    };
    let u0 = Lin::state();
    let n0 = b.intern(u0.clone());
    let mut nodes = vec![n0];
    let mut states = vec![u0];
    let mut stage_idx: Vec<Vec<usize>> = Vec::new();

    let finish = |b: &mut Builder<T>, um: &Lin<T>, idx: &[usize], incr: Lin<T>| -> (usize, Lin<T>) {
        if c.gsa {
            let last = *idx.last().expect("at least one stage");
            (last, b.value(last))
        } else {
            let mut out = um.clone();
            out.add_scaled(&T::one(), &incr);
            (b.intern(out.clone()), out)
        }
    };

    b.current = Some(0);
    for m in 0..c.m {
        let um = states[m].clone();
        let mut idx = Vec::with_capacity(s);
        let mut incr = Lin::zero();
        for i in 0..s {
            let mut known = um.clone();
            for (j, &col) in idx.iter().enumerate() {
                known.add_scaled(&(h.clone() * c.ea[i][j].clone()), &f_col(col, T::one()));
                known.add_scaled(&(h.clone() * c.ia[i][j].clone()), &g_col(col, T::one()));
            }
            idx.push(b.stage(known, h.clone() * c.ia[i][i].clone()));
        }
        for (j, &col) in idx.iter().enumerate() {
            incr.add_scaled(&(h.clone() * c.eb[j].clone()), &f_col(col, T::one()));
            incr.add_scaled(&(h.clone() * c.ib[j].clone()), &g_col(col, T::one()));
        }
        let (node, state) = finish(&mut b, &um, &idx, incr);
        nodes.push(node);
        states.push(state);
        stage_idx.push(idx);
    }

    for k in 1..=c.k {
        b.current = Some(k);
        let mut new_nodes = vec![nodes[0]];
        let mut new_states = vec![states[0].clone()];
        let mut new_idx = Vec::with_capacity(c.m);
        for m in 0..c.m {
            let um = new_states[m].clone();
            let mut idx: Vec<usize> = Vec::with_capacity(s);
            let mut dk: Vec<Lin<T>> = Vec::with_capacity(s);
            let mut dl: Vec<Lin<T>> = Vec::with_capacity(s);
            for i in 0..s {
                let rx = &c.rx[m][i];
                let ri = &c.ri[m][i];
                let mut known = um.clone();
                for l in 0..c.m {
                    known.add_scaled(&(h.clone() * rx.integration[l].clone()), &f_col(nodes[l + 1], T::one()));
                    known.add_scaled(&(h.clone() * ri.integration[l].clone()), &g_col(nodes[l + 1], T::one()));
                }
                for j in 0..i {
                    known.add_scaled(&(h.clone() * c.ea[i][j].clone()), &dk[j]);
                    known.add_scaled(&(h.clone() * c.ia[i][j].clone()), &dl[j]);
                }
                let (pref_f, pref_g) = if c.gsa {
                    (
                        node_combo(&nodes, m, rx, c.ec[i].is_zero(), false),
                        node_combo(&nodes, m, ri, c.ic[i].is_zero(), true),
                    )
                } else {
                    let col = stage_idx[m][i];
                    (f_col(col, T::one()), g_col(col, T::one()))
                };
                let gamma = h.clone() * c.ia[i][i].clone();
                known.add_scaled(&-gamma.clone(), &pref_g);
                let col = b.stage(known, gamma);
                let left_node = c.gsa && c.ec[i].is_zero() && c.ea[i].iter().all(|v| v.is_zero());
                let fcol = if left_node { new_nodes[m] } else { col };
                let mut dki = f_col(fcol, T::one());
                dki.add_scaled(&-T::one(), &pref_f);
                let mut dli = g_col(col, T::one());
                dli.add_scaled(&-T::one(), &pref_g);
                dk.push(dki);
                dl.push(dli);
                idx.push(col);
            }
            let mut incr = Lin::zero();
            if !c.gsa {
                for l in 0..c.m {
                    let w = h.clone() * c.s_sub[m][l].clone();
                    incr.add_scaled(&w, &f_col(nodes[l + 1], T::one()));
                    incr.add_scaled(&w, &g_col(nodes[l + 1], T::one()));
                }
                for j in 0..s {
                    incr.add_scaled(&(h.clone() * c.eb[j].clone()), &dk[j]);
                    incr.add_scaled(&(h.clone() * c.ib[j].clone()), &dl[j]);
                }
            }
            let (node, state) = finish(&mut b, &um, &idx, incr);
            new_nodes.push(node);
            new_states.push(state);
            new_idx.push(idx);
        }
        nodes = new_nodes;
        states = new_states;
        stage_idx = new_idx;
    }
    Unrolled {
        rows: b.rows,
        diag: b.diag,
        sweep: b.sweep,
        output: states.pop().expect("M ≥ 1"),
    }
}

/// Drops the leading initial-value stage when nothing refers to it.
fn prune<T: Scalar>(u: &mut Unrolled<T>) {
    loop {
        let n = u.rows.len();
        let used = |j: usize| {
            !u.diag[j].is_zero()
                || !at(&u.output.ex, j).is_zero()
                || !at(&u.output.im, j).is_zero()
                || (j + 1..n).any(|r| !at(&u.rows[r].ex, j).is_zero() || !at(&u.rows[r].im, j).is_zero())
        };
        let Some(dead) = (0..n).find(|&j| u.sweep[j].is_none() && !used(j)) else {
            return;
        };
        let drop_col = |v: &mut Vec<T>| {
            if v.len() > dead {
                v.remove(dead);
            }
        };
        u.rows.remove(dead);
        u.diag.remove(dead);
        u.sweep.remove(dead);
        for r in &mut u.rows {
            drop_col(&mut r.ex);
            drop_col(&mut r.im);
        }
        drop_col(&mut u.output.ex);
        drop_col(&mut u.output.im);
    }
}

type Parts<T> = (Vec<Vec<T>>, Vec<T>, Vec<Vec<T>>, Vec<T>);

fn matrices<T: Scalar>(u: &Unrolled<T>) -> Parts<T> {
    let n = u.rows.len();
    let mut ea = vec![vec![T::zero(); n]; n];
    let mut ia = vec![vec![T::zero(); n]; n];
    for r in 0..n {
        for c in 0..r {
            ea[r][c] = at(&u.rows[r].ex, c);
            ia[r][c] = at(&u.rows[r].im, c);
        }
        ia[r][r] = u.diag[r].clone();
    }
    let eb = (0..n).map(|j| at(&u.output.ex, j)).collect();
    let ib = (0..n).map(|j| at(&u.output.im, j)).collect();
    (ea, eb, ia, ib)
}

fn exact_coeffs(base: &ImexTableau, q: &QuadratureSet, k: usize) -> Result<Coeffs<Rational>, AssemblyError> {
    let (Some(e), Some(i)) = (&base.explicit.exact, &base.implicit.exact) else {
        unreachable!("caller checks exactness")
    };
    let rows = |c: &[Rational]| -> Result<Vec<Vec<Rows<Rational>>>, QuadratureError> {
        (0..q.m())
            .map(|m| {
                c.iter()
                    .map(|ci| {
                        let r = q.stage_row_exact(ci, m)?;
                        Ok(Rows {
                            integration: r.integration,
                            interpolation: r.interpolation,
                        })
                    })
                    .collect()
            })
            .collect()
    };
    Ok(Coeffs {
        m: q.m(),
        k,
        gsa: base.is_gsa(),
        h: exact::q(1, q.m() as i64),
        ea: e.a.clone(),
        eb: e.b.clone(),
        ec: e.c.clone(),
        ia: i.a.clone(),
        ib: i.b.clone(),
        ic: i.c.clone(),
        s_sub: q.s_sub_exact().to_vec(),
        rx: rows(&e.c)?,
        ri: rows(&i.c)?,
    })
}

fn float_coeffs(base: &ImexTableau, q: &QuadratureSet, k: usize) -> Result<Coeffs<f64>, AssemblyError> {
    let rows = |part: &RkTableau| -> Result<Vec<Vec<Rows<f64>>>, QuadratureError> {
        (0..q.m())
            .map(|m| {
                (0..part.stages())
                    .map(|i| {
                        let r = match &part.exact {
                            Some(e) => q.stage_row_exact(&e.c[i], m)?.to_f64(),
                            None => q.stage_row(part.c[i], m)?,
                        };
                        Ok(Rows {
                            integration: r.integration,
                            interpolation: r.interpolation,
                        })
                    })
                    .collect()
            })
            .collect()
    };
    let (e, i) = (&base.explicit, &base.implicit);
    Ok(Coeffs {
        m: q.m(),
        k,
        gsa: base.is_gsa(),
        h: 1.0 / q.m() as f64,
        ea: e.a.clone(),
        eb: e.b.clone(),
        ec: e.c.clone(),
        ia: i.a.clone(),
        ib: i.b.clone(),
        ic: i.c.clone(),
        s_sub: q.s_sub.clone(),
        rx: rows(e)?,
        ri: rows(i)?,
    })
}

fn row_sums_f64(a: &[Vec<f64>]) -> Vec<f64> {
    a.iter().map(|r| r.iter().sum()).collect()
}

/// Assembled tableau of InDC(base, M, K) plus bookkeeping.
#[derive(Debug, Clone)]
pub struct AssembledTableau {
    pub tableau: ImexTableau,
    pub base: ImexTableau,
    pub m: usize,
    pub k: usize,
    /// Sweep (0 = prediction) that created each stage; `None` for a
    /// leading stage equal to the step's initial value.
    pub sweep_of_stage: Vec<Option<usize>>,
}

/// Diagonal and sub-diagonal sweep blocks of an assembled tableau.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks {
    pub t: Vec<Vec<f64>>,
    pub t_tilde: Vec<Vec<f64>>,
    /// Coupling of the first correction sweep to the prediction; `None` when K = 0.
    pub p: Option<Vec<Vec<f64>>>,
    pub p_tilde: Option<Vec<Vec<f64>>>,
}

/// Summary of [`analyze`].
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AssemblyReport {
    pub gsa: bool,
    pub kind: ImexType,
    pub implicit_invertible: bool,
    pub det_identity_holds: bool,
    /// det of the prediction block T.
    pub det_t: f64,
    /// det((1/M)·Â_base)^M.
    pub det_t_expected: f64,
    /// det of the assembled implicit matrix without its leading stage.
    pub det_assembled: f64,
}

/// Builds the assembled double tableau of InDC with `m` nodes and `k`
/// corrections on `base`.
pub fn assemble(base: &ImexTableau, m: usize, k: usize) -> Result<AssembledTableau, AssemblyError> {
    let s = base.stages();
    let size = m.saturating_mul(k.saturating_add(1)).saturating_mul(s);
    if size > MAX_ASSEMBLED {
        return Err(AssemblyError::TooLarge { size });
    }
    if !base.is_gsa() && s != 1 {
        return Err(AssemblyError::UnsupportedStructure(base.name.clone()));
    }
    let quad = QuadratureSet::build(m)?;
    let name = format!("InDC-{}-{}-{}", base.name, m, k);
    let order = (base.order * (k as u32 + 1)).min(m as u32);
    let (explicit, implicit, sweep) = if base.is_exact() {
        let mut u = unroll(&exact_coeffs(base, &quad, k)?);
        prune(&mut u);
        let (ea, eb, ia, ib) = matrices(&u);
        (
            RkTableau::from_exact_rows(ea, eb),
            RkTableau::from_exact_rows(ia, ib),
            u.sweep,
        )
    } else {
        let mut u = unroll(&float_coeffs(base, &quad, k)?);
        prune(&mut u);
        let (ea, eb, ia, ib) = matrices(&u);
        let (ec, ic) = (row_sums_f64(&ea), row_sums_f64(&ia));
        (RkTableau::from_f64(ea, eb, ec), RkTableau::from_f64(ia, ib, ic), u.sweep)
    };
    Ok(AssembledTableau {
        tableau: ImexTableau::new(name, order, explicit, implicit),
        base: base.clone(),
        m,
        k,
        sweep_of_stage: sweep,
    })
}

impl AssembledTableau {
    fn sweep_stages(&self, k: usize) -> Vec<usize> {
        (0..self.sweep_of_stage.len())
            .filter(|&j| self.sweep_of_stage[j] == Some(k))
            .collect()
    }

    /// Sweep blocks T, T̃ (prediction diagonal) and P, P̃ (first correction
    /// rows against prediction columns).
    pub fn blocks(&self) -> Blocks {
        let sub = |a: &[Vec<f64>], rows: &[usize], cols: &[usize]| -> Vec<Vec<f64>> {
            rows.iter().map(|&r| cols.iter().map(|&c| a[r][c]).collect()).collect()
        };
        let s0 = self.sweep_stages(0);
        let s1 = self.sweep_stages(1);
        let (ea, ia) = (&self.tableau.explicit.a, &self.tableau.implicit.a);
        let has_p = self.k > 0;
        Blocks {
            t: sub(ia, &s0, &s0),
            t_tilde: sub(ea, &s0, &s0),
            p: has_p.then(|| sub(ia, &s1, &s0)),
            p_tilde: has_p.then(|| sub(ea, &s1, &s0)),
        }
    }

    /// Stage count of the assembled tableau.
    pub fn stages(&self) -> usize {
        self.tableau.stages()
    }
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// GSA, type, invertibility and the block determinant identities.
pub fn analyze(a: &AssembledTableau) -> AssemblyReport {
    let t = &a.tableau;
    let kind = classify(t);
    let imp = &t.implicit;
    let first_row_zero = imp.a[0].iter().all(|v| *v == 0.0);
    let implicit_invertible = if first_row_zero {
        imp.stages() > 1 && imp.scaled_det_lower(1).abs() > crate::tableau::INVERTIBLE_TOL
    } else {
        imp.is_invertible()
    };

    let base_imp = &a.base.implicit;
    let skip = usize::from(base_imp.a[0].iter().all(|v| *v == 0.0) && base_imp.stages() > 1);
    let inner: Vec<usize> = (0..t.stages()).filter(|&j| a.sweep_of_stage[j].is_some()).collect();
    let t_stages = a.sweep_stages(0);
    let mm = a.m as i64;
    let (det_t, det_t_expected, det_assembled, holds) = match (&imp.exact, &base_imp.exact) {
        (Some(ie), Some(be)) => {
            let prod = |idx: &[usize]| -> Rational { idx.iter().map(|&j| ie.a[j][j].clone()).product() };
            let det_t = prod(&t_stages);
            let scaled: Rational = (skip..base_imp.stages()).map(|j| &be.a[j][j] * exact::q(1, mm)).product();
            let expected = num_traits::pow(scaled, a.m);
            let det_asm = prod(&inner);
            let holds = det_t == expected && det_asm == num_traits::pow(det_t.clone(), a.k + 1);
            (exact::to_f64(&det_t), exact::to_f64(&expected), exact::to_f64(&det_asm), holds)
        }
        _ => {
            let prod = |idx: &[usize]| -> f64 { idx.iter().map(|&j| imp.a[j][j]).product() };
            let det_t = prod(&t_stages);
            let scaled: f64 = (skip..base_imp.stages())
                .map(|j| base_imp.a[j][j] / a.m as f64)
                .product();
            let expected = scaled.powi(a.m as i32);
            let det_asm = prod(&inner);
            let holds = close(det_t, expected) && close(det_asm, det_t.powi(a.k as i32 + 1));
            (det_t, expected, det_asm, holds)
        }
    };
    AssemblyReport {
        gsa: t.is_gsa(),
        kind,
        implicit_invertible,
        det_identity_holds: holds,
        det_t,
        det_t_expected,
        det_assembled,
    }
}

/// Text form of the assembled tableau, readable by the tableau parser.
pub fn emit(a: &AssembledTableau, fmt: TextFormat) -> String {
    format_tableau(&a.tableau, fmt)
}
